"""Self-calibrated dual contrasting for Raman spectra.

Spectrum handling, synthetic data, augmentation, a numpy autodiff core, the
two-head network, its contrastive losses, the training loop and metrics.
"""
from .config import ExperimentConfig, TrainConfig
from .model import ModelConfig, ScdcModel
from .spectra import LabeledSpectrum, Spectrum, SplitDataset
from .synth import ClassProfile, SynthConfig, generate_dataset
from .trainer import evaluate_checkpoint, train

__version__ = "0.1.0"
