"""Synthetic Raman-like spectra: Gaussian peaks over a polynomial baseline."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .rng import RngStreams
from .spectra import LabeledSpectrum, Spectrum


@dataclass(frozen=True)
class ClassProfile:
    """Peak list and baseline of one class.

    Baseline coefficients are in increasing order of power and are evaluated on
    the axis mapped to [0, 1].
    """

    peak_centers: tuple[float, ...]
    peak_widths: tuple[float, ...]
    peak_heights: tuple[float, ...]
    baseline_coeffs: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        n = len(self.peak_centers)
        if n < 1 or len(self.peak_widths) != n or len(self.peak_heights) != n:
            raise ValueError("peak centers, widths and heights need equal length >= 1")
        if any(w <= 0 for w in self.peak_widths):
            raise ValueError("peak widths must be positive")
        if any(h <= 0 for h in self.peak_heights):
            raise ValueError("peak heights must be positive")
        if not 1 <= len(self.baseline_coeffs) <= 4:
            raise ValueError("baseline polynomial degree must be <= 3")
        for name in ("peak_centers", "peak_widths", "peak_heights", "baseline_coeffs"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))


@dataclass(frozen=True)
class SynthConfig:
    class_profiles: tuple[ClassProfile, ...]
    samples_per_class: int = 200
    noise_sigma: float = 0.0
    axis_range: tuple[float, float] = (400.0, 1800.0)
    length: int = 1000
    seed: int = 0
    # per-sample variation, off by default: a common offset of all peak
    # centers (axis units) and log-normal factors on each peak height
    shift_sigma: float = 0.0
    height_jitter: float = 0.0

    def __post_init__(self):
        lo, hi = self.axis_range
        if not lo < hi:
            raise ValueError("axis_range must satisfy low < high")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.length < 2:
            raise ValueError("length must be >= 2")
        if self.shift_sigma < 0 or self.height_jitter < 0:
            raise ValueError("shift_sigma and height_jitter must be >= 0")
        object.__setattr__(self, "class_profiles", tuple(self.class_profiles))
        object.__setattr__(self, "axis_range", (float(lo), float(hi)))

    def axis(self) -> np.ndarray:
        return np.linspace(self.axis_range[0], self.axis_range[1], self.length)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["class_profiles"] = [asdict(p) for p in self.class_profiles]
        return _listify(d)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        d["class_profiles"] = tuple(ClassProfile(**p) for p in d["class_profiles"])
        if "axis_range" in d:
            d["axis_range"] = tuple(d["axis_range"])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "SynthConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _listify(obj):
    if isinstance(obj, dict):
        return {k: _listify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_listify(v) for v in obj]
    return obj


def clean_signal(profile: ClassProfile, axis: np.ndarray) -> np.ndarray:
    """Noise-free baseline plus peak sum on ``axis``."""
    t = (axis - axis[0]) / (axis[-1] - axis[0])
    out = np.polynomial.polynomial.polyval(t, profile.baseline_coeffs)
    out = np.broadcast_to(out, axis.shape).astype(np.float64)
    for c, w, h in zip(profile.peak_centers, profile.peak_widths, profile.peak_heights):
        out = out + h * np.exp(-0.5 * ((axis - c) / w) ** 2)
    return out


def render_spectrum(profile: ClassProfile, config: SynthConfig,
                    rng: np.random.Generator, id: str = "") -> Spectrum:
    """One noisy draw of ``profile``.

    Draw order is fixed (peak offset, peak height factors, channel noise) so a
    substream always yields the same spectrum.
    """
    axis = config.axis()
    offset = rng.normal() * config.shift_sigma
    factors = np.exp(rng.normal(size=len(profile.peak_centers)) * config.height_jitter)
    if offset or config.height_jitter:
        profile = ClassProfile(
            tuple(c + offset for c in profile.peak_centers), profile.peak_widths,
            tuple(h * f for h, f in zip(profile.peak_heights, factors)),
            profile.baseline_coeffs)
    values = clean_signal(profile, axis)
    if config.noise_sigma > 0:
        values = values + rng.normal(0.0, config.noise_sigma, size=axis.size)
    return Spectrum(values, axis, id)


def generate_dataset(config: SynthConfig) -> list[LabeledSpectrum]:
    """``samples_per_class`` spectra per profile, labelled by profile index.

    Sample ``k`` draws its noise from the substream ``(seed, "synth", k)``.
    """
    if len(config.class_profiles) < 2:
        raise ValueError("need at least 2 class profiles")
    streams = RngStreams(config.seed)
    out = []
    k = 0
    for label, profile in enumerate(config.class_profiles):
        for j in range(config.samples_per_class):
            spec = render_spectrum(profile, config, streams.stream("synth", k),
                                   id=f"c{label}_{j:04d}")
            out.append(LabeledSpectrum(spec, label))
            k += 1
    return out


def nearest_centroid_accuracy(data: list[LabeledSpectrum]) -> float:
    """Accuracy of assigning each raw spectrum to its closest class mean.

    Each spectrum is left out of its own class mean, so the score does not
    rise with dimension through self-matching.
    """
    x = np.stack([d.spectrum.intensities for d in data])
    y = np.array([d.label for d in data])
    classes, yi, counts = np.unique(y, return_inverse=True, return_counts=True)
    if np.any(counts < 2):
        raise ValueError("every class needs at least 2 spectra")
    sums = np.stack([x[yi == c].sum(axis=0) for c in range(len(classes))])
    centroids = sums / counts[:, None]
    d2 = ((x[:, None, :] - centroids[None]) ** 2).sum(-1)
    own = (sums[yi] - x) / (counts[yi] - 1)[:, None]
    d2[np.arange(len(x)), yi] = ((x - own) ** 2).sum(-1)
    return float(np.mean(np.argmin(d2, axis=1) == yi))
