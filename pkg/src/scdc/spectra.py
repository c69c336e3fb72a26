"""Spectral data model, CSV ingestion, preprocessing and annotation splits."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)


class SpectrumError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Spectrum:
    """One intensity trace over a strictly increasing wavenumber axis."""

    intensities: np.ndarray
    axis: np.ndarray
    id: str = ""
    degenerate: bool = False

    def __post_init__(self):
        x = np.asarray(self.intensities, dtype=np.float64)
        a = np.asarray(self.axis, dtype=np.float64)
        if x.ndim != 1 or a.ndim != 1:
            raise SpectrumError(f"{self.id!r}: intensities and axis must be 1-D")
        if x.shape != a.shape:
            raise SpectrumError(
                f"{self.id!r}: {x.size} intensities for {a.size} axis points")
        if x.size < 2:
            raise SpectrumError(f"{self.id!r}: need at least 2 points")
        if not np.all(np.diff(a) > 0):
            raise SpectrumError(f"{self.id!r}: axis must be strictly increasing")
        if not np.all(np.isfinite(x)):
            raise SpectrumError(f"{self.id!r}: non-finite intensity")
        x.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "intensities", x)
        object.__setattr__(self, "axis", a)

    def __len__(self) -> int:
        return self.intensities.size

    def with_intensities(self, values, degenerate: bool | None = None) -> "Spectrum":
        return Spectrum(values, self.axis, self.id,
                        self.degenerate if degenerate is None else degenerate)


@dataclass(frozen=True, eq=False)
class LabeledSpectrum:
    spectrum: Spectrum
    label: int

    def __post_init__(self):
        if int(self.label) != self.label or self.label < 0:
            raise SpectrumError(f"{self.spectrum.id!r}: bad label {self.label!r}")
        object.__setattr__(self, "label", int(self.label))

    @property
    def id(self) -> str:
        return self.spectrum.id


@dataclass
class SplitDataset:
    """Annotated subset, unannotated subset and held-out test set."""

    annotated: list[LabeledSpectrum]
    unannotated: list[Spectrum]
    test: list[LabeledSpectrum]
    class_count: int
    annotation_fraction: float = 1.0

    def __post_init__(self):
        ids = [s.id for s in self.annotated] + [s.id for s in self.unannotated] \
            + [s.id for s in self.test]
        if len(set(ids)) != len(ids):
            raise SpectrumError("annotated, unannotated and test ids overlap")
        for item in list(self.annotated) + list(self.test):
            if item.label >= self.class_count:
                raise SpectrumError(
                    f"{item.id!r}: label {item.label} outside {self.class_count} classes")


@dataclass(frozen=True)
class PreprocessConfig:
    target_length: int = 1024
    normalize: bool = True

    def __post_init__(self):
        if self.target_length < 8:
            raise ValueError("target_length must be >= 8")


# --- CSV ---------------------------------------------------------------------

def load_csv(path, label_column: str | None = "label",
             id_column: str = "id") -> list[Spectrum | LabeledSpectrum]:
    """Read ``id,label,<axis_1>,...,<axis_L>`` rows.

    Axis values come from the header. Rows with an empty label cell (or every
    row, when the label column is absent) come back as bare :class:`Spectrum`.
    Row numbers in error messages count data rows from 1.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SpectrumError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if id_column not in header:
            raise SpectrumError(f"{path}: missing {id_column!r} column")
        id_idx = header.index(id_column)
        lab_idx = header.index(label_column) if label_column in header else None
        axis_idx = [i for i in range(len(header)) if i not in (id_idx, lab_idx)]
        try:
            axis = np.array([float(header[i]) for i in axis_idx])
        except ValueError:
            raise SpectrumError(f"{path}: header axis values must be numeric") from None
        if axis.size < 2 or not np.all(np.diff(axis) > 0):
            raise SpectrumError(f"{path}: axis in header is not strictly increasing")

        out: list[Spectrum | LabeledSpectrum] = []
        for rownum, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise SpectrumError(
                    f"row {rownum}: expected {len(header)} cells, got {len(row)}")
            try:
                values = np.array([float(row[i]) for i in axis_idx])
            except ValueError:
                raise SpectrumError(f"row {rownum}: non-numeric intensity") from None
            if not np.all(np.isfinite(values)):
                raise SpectrumError(f"row {rownum}: non-finite intensity")
            spec = Spectrum(values, axis, row[id_idx].strip())
            cell = row[lab_idx].strip() if lab_idx is not None else ""
            if cell:
                try:
                    label = int(cell)
                except ValueError:
                    raise SpectrumError(f"row {rownum}: non-integer label {cell!r}") from None
                out.append(LabeledSpectrum(spec, label))
            else:
                out.append(spec)
    return out


def _fmt(v: float) -> str:
    return repr(float(v))


def write_csv(path, records: Iterable[Spectrum | LabeledSpectrum]) -> None:
    """Write records in the ``load_csv`` format; all records must share one axis."""
    records = list(records)
    if not records:
        raise SpectrumError("nothing to write")
    first = _spectrum_of(records[0])
    axis = first.axis
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "label", *[_fmt(a) for a in axis]])
        for rec in records:
            s = _spectrum_of(rec)
            if s.axis.shape != axis.shape or not np.array_equal(s.axis, axis):
                raise SpectrumError(f"{s.id!r}: axis differs from first record")
            label = str(rec.label) if isinstance(rec, LabeledSpectrum) else ""
            w.writerow([s.id, label, *[_fmt(v) for v in s.intensities]])


def _spectrum_of(rec) -> Spectrum:
    return rec.spectrum if isinstance(rec, LabeledSpectrum) else rec


# --- preprocessing -------------------------------------------------------------

def resample_to_length(s: Spectrum, target_length: int) -> Spectrum:
    """Linear interpolation onto ``target_length`` evenly spaced axis points."""
    if target_length < 2:
        raise SpectrumError("target_length must be >= 2")
    lo, hi = s.axis[0], s.axis[-1]
    new_axis = np.linspace(lo, hi, target_length)
    new_axis[0], new_axis[-1] = lo, hi
    values = np.interp(new_axis, s.axis, s.intensities)
    return Spectrum(values, new_axis, s.id, s.degenerate)


def minmax_normalize(s: Spectrum) -> Spectrum:
    """Rescale to span [0, 1]; constant input maps to zeros flagged degenerate."""
    x = s.intensities
    lo, hi = x.min(), x.max()
    if hi == lo:
        return s.with_intensities(np.zeros_like(x), degenerate=True)
    return s.with_intensities((x - lo) / (hi - lo))


def preprocess(s: Spectrum, cfg: PreprocessConfig = PreprocessConfig()) -> Spectrum:
    """Resample, then normalize."""
    out = resample_to_length(s, cfg.target_length)
    if cfg.normalize:
        out = minmax_normalize(out)
    return out


def preprocess_all(records: Sequence, cfg: PreprocessConfig = PreprocessConfig(),
                   drop_degenerate: bool = True) -> list:
    out = []
    for rec in records:
        spec = preprocess(_spectrum_of(rec), cfg)
        if spec.degenerate and drop_degenerate:
            log.warning("dropping degenerate spectrum %r", spec.id)
            continue
        out.append(LabeledSpectrum(spec, rec.label) if isinstance(rec, LabeledSpectrum)
                   else spec)
    return out


def stack(records: Sequence) -> np.ndarray:
    """Intensities of equal-length records as a ``[N, L]`` array."""
    return np.stack([_spectrum_of(r).intensities for r in records])


# --- splitting -----------------------------------------------------------------

def _by_class(data: Sequence[LabeledSpectrum]) -> dict[int, list[LabeledSpectrum]]:
    groups: dict[int, list[LabeledSpectrum]] = {}
    for item in data:
        groups.setdefault(item.label, []).append(item)
    return groups


def _check_classes(groups, class_count):
    missing = [c for c in range(class_count) if not groups.get(c)]
    if missing:
        raise SpectrumError(f"classes with no samples: {missing}")


def _stratified_take(groups, fraction, rng) -> tuple[list, list]:
    taken, rest = [], []
    for c in sorted(groups):
        members = sorted(groups[c], key=lambda r: r.id)
        order = rng.permutation(len(members))
        k = min(len(members), max(1, int(math.floor(fraction * len(members) + 0.5))))
        taken += [members[i] for i in order[:k]]
        rest += [members[i] for i in order[k:]]
    return taken, rest


def split_annotated(data: Sequence[LabeledSpectrum], fraction: float, seed: int,
                    class_count: int | None = None,
                    test: Sequence[LabeledSpectrum] = ()) -> SplitDataset:
    """Stratified draw of ``round(fraction * class_size)`` (at least 1) per class.

    The remaining samples lose their labels and form the unannotated pool.
    Rounding is half-up.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    groups = _by_class(data)
    if class_count is None:
        class_count = max(groups) + 1 if groups else 0
    _check_classes(groups, class_count)
    rng = np.random.default_rng([seed, 1])
    annotated, rest = _stratified_take(groups, fraction, rng)
    return SplitDataset(annotated, [r.spectrum for r in rest], list(test),
                        class_count, fraction)


def split_test(data: Sequence[LabeledSpectrum], test_fraction: float, seed: int,
               class_count: int | None = None) -> tuple[list, list]:
    """Stratified train/test partition; returns ``(train, test)``."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    groups = _by_class(data)
    if class_count is None:
        class_count = max(groups) + 1 if groups else 0
    _check_classes(groups, class_count)
    rng = np.random.default_rng([seed, 2])
    test, train = _stratified_take(groups, test_fraction, rng)
    return train, test
