"""From an experiment config to a preprocessed, split dataset."""
from __future__ import annotations

from .config import ConfigError, DatasetConfig, ExperimentConfig
from .spectra import (LabeledSpectrum, SplitDataset, load_csv, preprocess_all,
                      split_annotated, split_test)
from .synth import generate_dataset


def load_records(ds: DatasetConfig) -> tuple[list, list]:
    """Raw labelled and unlabelled records of the training source."""
    if ds.synth is not None:
        return generate_dataset(ds.synth), []
    rows = load_csv(ds.csv)
    labeled = [r for r in rows if isinstance(r, LabeledSpectrum)]
    unlabeled = [r for r in rows if not isinstance(r, LabeledSpectrum)]
    return labeled, unlabeled


def infer_class_count(ds: DatasetConfig, labeled) -> int:
    if ds.class_count is not None:
        return ds.class_count
    if ds.synth is not None:
        return len(ds.synth.class_profiles)
    if not labeled:
        raise ConfigError("no labelled rows; set dataset.class_count")
    return max(r.label for r in labeled) + 1


def build_dataset(exp: ExperimentConfig) -> SplitDataset:
    """Preprocess, hold out a test set, then hide labels outside the annotated draw.

    With ``test_csv`` the held-out set is its labelled rows; otherwise a
    stratified ``test_fraction`` of the labelled source. Unlabelled source rows
    join the unannotated pool.
    """
    ds, pre = exp.dataset, exp.preprocess
    labeled, unlabeled = load_records(ds)
    class_count = infer_class_count(ds, labeled)
    labeled = preprocess_all(labeled, pre)
    unlabeled = preprocess_all(unlabeled, pre)
    if ds.test_csv is not None:
        test = [r for r in preprocess_all(load_csv(ds.test_csv), pre)
                if isinstance(r, LabeledSpectrum)]
        train = labeled
    else:
        train, test = split_test(labeled, ds.test_fraction, ds.split_seed, class_count)
    data = split_annotated(train, ds.annotation_fraction, ds.split_seed, class_count, test)
    data.unannotated.extend(unlabeled)
    return SplitDataset(data.annotated, data.unannotated, data.test, class_count,
                        ds.annotation_fraction)

