"""JSON experiment configuration."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .augment import StrongAugConfig, WeakAugConfig
from .losses import ContrastConfig
from .spectra import PreprocessConfig
from .synth import SynthConfig

MODES = ("unsupervised", "semi", "supervised")
PAIRINGS = ("weak+strong", "weak-only", "strong-only")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AugmentConfig:
    weak: WeakAugConfig = field(default_factory=WeakAugConfig)
    strong: StrongAugConfig = field(default_factory=StrongAugConfig)
    # which families produce the two contrastive views
    pairing: str = "weak+strong"
    # augmentation applied to annotated batches: "weak" or "none"
    labeled: str = "weak"
    clip: tuple[float, float] = (-0.5, 1.5)

    def __post_init__(self):
        if self.pairing not in PAIRINGS:
            raise ConfigError(f"augment.pairing must be one of {PAIRINGS}")
        if self.labeled not in ("weak", "none"):
            raise ConfigError("augment.labeled must be 'weak' or 'none'")

    def to_dict(self) -> dict:
        return {"weak": self.weak.to_dict(), "strong": self.strong.to_dict(),
                "pairing": self.pairing, "labeled": self.labeled, "clip": list(self.clip)}

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentConfig":
        d = dict(d)
        if "weak" in d:
            d["weak"] = WeakAugConfig.from_dict(d["weak"])
        if "strong" in d:
            d["strong"] = StrongAugConfig.from_dict(d["strong"])
        if "clip" in d:
            d["clip"] = tuple(d["clip"])
        return cls(**d)


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "semi"
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    contrast: ContrastConfig = field(default_factory=ContrastConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    embed_dim: int = 128
    hidden_dim: int = 256
    blocks: tuple | None = None
    checkpoint_path: str | None = None
    log_path: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"train.mode must be one of {MODES}")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")


@dataclass(frozen=True)
class DatasetConfig:
    csv: str | None = None
    synth: SynthConfig | None = None
    test_csv: str | None = None
    test_fraction: float = 0.5
    annotation_fraction: float = 0.05
    split_seed: int = 0
    class_count: int | None = None

    def __post_init__(self):
        if (self.csv is None) == (self.synth is None):
            raise ConfigError("dataset needs exactly one of 'csv' or 'synth'")
        if not 0 < self.annotation_fraction <= 1:
            raise ConfigError("annotation_fraction must lie in (0, 1]")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    outputs: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        try:
            return _experiment_from_dict(d, base_dir)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_dict(load_json(path), base_dir=path.parent)

    def to_dict(self) -> dict:
        ds = self.dataset
        dataset = {k: getattr(ds, k) for k in
                   ("csv", "test_csv", "test_fraction", "annotation_fraction", "split_seed",
                    "class_count")}
        dataset["synth"] = ds.synth.to_dict() if ds.synth else None
        t = self.train
        train = {k: getattr(t, k) for k in ("mode", "epochs", "batch_size", "lr", "seed",
                                             "embed_dim", "hidden_dim")}
        if t.blocks is not None:
            train["blocks"] = [dict(b) for b in t.blocks]
        return {"dataset": dataset,
                "preprocess": asdict(self.preprocess),
                "augment": t.augment.to_dict(),
                "contrast": t.contrast.to_dict(),
                "train": train,
                "outputs": dict(self.outputs)}


def load_json(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc


def _resolve(p, base_dir):
    if p is None or base_dir is None or Path(p).is_absolute():
        return p
    return str(base_dir / p)


def _experiment_from_dict(d: dict, base_dir) -> ExperimentConfig:
    known = {"dataset", "preprocess", "augment", "contrast", "train", "outputs"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    ds = dict(d.get("dataset", {}))
    if ds.get("synth") is not None:
        ds["synth"] = SynthConfig.from_dict(ds["synth"])
    for key in ("csv", "test_csv"):
        ds[key] = _resolve(ds.get(key), base_dir)
    dataset = DatasetConfig(**ds)
    outputs = {k: _resolve(v, base_dir) for k, v in d.get("outputs", {}).items()}
    tr = dict(d.get("train", {}))
    if "blocks" in tr and tr["blocks"] is not None:
        tr["blocks"] = tuple(dict(b) for b in tr["blocks"])
    train = TrainConfig(
        contrast=ContrastConfig(**d.get("contrast", {})),
        augment=AugmentConfig.from_dict(d.get("augment", {})),
        checkpoint_path=outputs.get("checkpoint"),
        log_path=outputs.get("log"),
        **tr)
    return ExperimentConfig(dataset, PreprocessConfig(**d.get("preprocess", {})),
                            train, outputs)
