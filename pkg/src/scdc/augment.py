"""Weak and strong spectral augmentation families."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .spectra import Spectrum


@dataclass(frozen=True)
class WeakAugConfig:
    """Local perturbations: optional smoothing, global scale, additive noise.

    ``noise_sigma`` is a fraction of the spectrum's intensity range.
    """

    noise_sigma: float = 0.01
    scale_range: tuple[float, float] = (0.9, 1.1)
    smooth_prob: float = 0.5
    smooth_kernel: int = 5

    def __post_init__(self):
        lo, hi = self.scale_range
        if not 0 < lo <= hi:
            raise ValueError("scale_range must satisfy 0 < low <= high")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0 <= self.smooth_prob <= 1:
            raise ValueError("smooth_prob must lie in [0, 1]")
        if self.smooth_kernel < 1 or self.smooth_kernel % 2 == 0:
            raise ValueError("smooth_kernel must be a positive odd integer")
        object.__setattr__(self, "scale_range", (float(lo), float(hi)))

    @classmethod
    def disabled(cls) -> "WeakAugConfig":
        return cls(noise_sigma=0.0, scale_range=(1.0, 1.0), smooth_prob=0.0)

    @classmethod
    def from_dict(cls, d: dict) -> "WeakAugConfig":
        d = dict(d)
        if "scale_range" in d:
            d["scale_range"] = tuple(d["scale_range"])
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scale_range"] = list(self.scale_range)
        return d


@dataclass(frozen=True)
class StrongAugConfig:
    """Weak perturbations followed by a circular channel shift and a reversal."""

    weak: WeakAugConfig = field(default_factory=WeakAugConfig)
    max_shift: int = 30
    flip_prob: float = 0.5

    def __post_init__(self):
        if self.max_shift < 0:
            raise ValueError("max_shift must be >= 0")
        if not 0 <= self.flip_prob <= 1:
            raise ValueError("flip_prob must lie in [0, 1]")

    @classmethod
    def disabled(cls) -> "StrongAugConfig":
        return cls(WeakAugConfig.disabled(), max_shift=0, flip_prob=0.0)

    @classmethod
    def from_dict(cls, d: dict) -> "StrongAugConfig":
        d = dict(d)
        if "weak" in d:
            d["weak"] = WeakAugConfig.from_dict(d["weak"])
        return cls(**d)

    def to_dict(self) -> dict:
        return {"weak": self.weak.to_dict(), "max_shift": self.max_shift,
                "flip_prob": self.flip_prob}


@dataclass(frozen=True)
class AugmentedPair:
    weak_view: Spectrum
    strong_view: Spectrum
    source_id: str


def gaussian_kernel(size: int) -> np.ndarray:
    """Normalized Gaussian taps; sigma is a quarter of the span."""
    if size == 1:
        return np.ones(1)
    half = size // 2
    sigma = half / 2.0
    k = np.exp(-0.5 * (np.arange(-half, half + 1) / sigma) ** 2)
    return k / k.sum()


def smooth(x: np.ndarray, size: int) -> np.ndarray:
    half = size // 2
    padded = np.pad(x, half, mode="edge")
    return np.convolve(padded, gaussian_kernel(size), mode="valid")


def weak_values(x: np.ndarray, cfg: WeakAugConfig, rng: np.random.Generator) -> np.ndarray:
    # fixed draw order keeps streams aligned whether or not a step is active
    do_smooth = rng.random() < cfg.smooth_prob
    scale = rng.uniform(*cfg.scale_range)
    noise = rng.standard_normal(x.size)
    span = x.max() - x.min()
    if do_smooth and cfg.smooth_kernel > 1:
        x = smooth(x, cfg.smooth_kernel)
    x = x * scale
    if cfg.noise_sigma > 0:
        x = x + noise * (cfg.noise_sigma * span)
    return x


def strong_values(x: np.ndarray, cfg: StrongAugConfig, rng: np.random.Generator) -> np.ndarray:
    x = weak_values(x, cfg.weak, rng)
    shift = int(rng.integers(-cfg.max_shift, cfg.max_shift + 1)) if cfg.max_shift else 0
    flip = rng.random() < cfg.flip_prob
    if shift:
        x = np.roll(x, shift)
    if flip:
        x = x[::-1]
    return x


def weak_augment(s: Spectrum, cfg: WeakAugConfig, rng: np.random.Generator) -> Spectrum:
    return s.with_intensities(weak_values(s.intensities, cfg, rng))


def strong_augment(s: Spectrum, cfg: StrongAugConfig, rng: np.random.Generator) -> Spectrum:
    return s.with_intensities(strong_values(s.intensities, cfg, rng))


def circular_shift(s: Spectrum, k: int) -> Spectrum:
    return s.with_intensities(np.roll(s.intensities, k))


def make_pair(s: Spectrum, weak_cfg: WeakAugConfig, strong_cfg: StrongAugConfig,
              rng: np.random.Generator) -> AugmentedPair:
    """Weak and strong view from independent child streams of ``rng``."""
    weak_rng, strong_rng = rng.spawn(2)
    return AugmentedPair(weak_augment(s, weak_cfg, weak_rng),
                         strong_augment(s, strong_cfg, strong_rng), s.id)
