"""
Synthetic Raman-like spectra
============================

Builds the frozen benchmark corpus, measures how hard it is with a
nearest-centroid classifier, and looks at one weak/strong view pair.
"""
import numpy as np

from scdc import benchmark as bm
from scdc.augment import StrongAugConfig, WeakAugConfig, make_pair
from scdc.rng import seed_rng
from scdc.spectra import preprocess
from scdc.synth import generate_dataset, nearest_centroid_accuracy

# six classes share a sharp reference band and differ by two broad bands
cfg = bm.benchmark_synth_config()
data = generate_dataset(cfg)
print(len(data), "spectra of length", len(data[0].spectrum))

# leave-one-out nearest-centroid accuracy on the raw spectra
print("nearest-centroid accuracy: %.3f" % nearest_centroid_accuracy(data))

# per-sample peak offsets move the class bands around
first = [d.spectrum.intensities for d in data if d.label == 0][:5]
print("argmax channel of five class-0 spectra:", [int(np.argmax(x)) for x in first])

# preprocessing: resample to 1024 channels, then min-max to [0, 1]
s = preprocess(data[0].spectrum)
print("preprocessed length %d, range [%.2f, %.2f]" % (len(s), s.intensities.min(),
                                                      s.intensities.max()))

# the weak view stays close to the source, the strong view moves further
pair = make_pair(s, WeakAugConfig(), StrongAugConfig(), seed_rng(0).stream("demo"))
for name, view in (("weak", pair.weak_view), ("strong", pair.strong_view)):
    print("%-6s view: mean |change| %.3f" % (name, np.abs(view.intensities - s.intensities).mean()))
