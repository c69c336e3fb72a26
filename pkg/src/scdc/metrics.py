"""Clustering and classification metrics.

Degenerate cases follow fixed conventions: 0/0 counts as 0, a class with no
positives and no predictions has F1 0, and AUROC skips classes absent from the
true labels.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import rankdata


def _labels(x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError("labels must be 1-D")
    return x.astype(int)


def contingency(true_labels, cluster_ids) -> np.ndarray:
    """Counts with rows = distinct true labels, columns = distinct cluster ids."""
    t, k = _labels(true_labels), _labels(cluster_ids)
    if t.shape != k.shape:
        raise ValueError("label arrays differ in length")
    _, ti = np.unique(t, return_inverse=True)
    _, ki = np.unique(k, return_inverse=True)
    table = np.zeros((ti.max(initial=-1) + 1, ki.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (ti, ki), 1)
    return table


@dataclass
class ConfusionMatrix:
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("confusion matrix must be square")
        if np.any(c < 0):
            raise ValueError("confusion counts must be non-negative")
        self.counts = c.astype(np.int64)

    @classmethod
    def from_labels(cls, true_labels, predicted, class_count: int) -> "ConfusionMatrix":
        t, p = _labels(true_labels), _labels(predicted)
        m = np.zeros((class_count, class_count), dtype=np.int64)
        np.add.at(m, (t, p), 1)
        return cls(m)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


# --- assignment ----------------------------------------------------------------

def hungarian_match(cost) -> tuple[np.ndarray, float]:
    """Minimum-cost perfect matching; returns ``(perm, total)`` with row i -> perm[i]."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError("cost matrix must be square")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(len(rows), dtype=int)
    perm[rows] = cols
    return perm, float(cost[rows, cols].sum())


def clustering_accuracy(true_labels, cluster_ids) -> float:
    table = contingency(true_labels, cluster_ids)
    if table.size == 0:
        return 0.0
    n = max(table.shape)
    square = np.zeros((n, n))
    square[:table.shape[0], :table.shape[1]] = table
    perm, cost = hungarian_match(-square)
    return float(-cost / table.sum())


# --- information-theoretic and pair-counting scores --------------------------

def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(true_labels, cluster_ids) -> float:
    """Mutual information over the arithmetic mean of the two entropies."""
    table = contingency(true_labels, cluster_ids).astype(np.float64)
    n = table.sum()
    if n == 0:
        return 0.0
    pt, pk = table.sum(axis=1), table.sum(axis=0)
    nz = table > 0
    mi = float((table[nz] / n * np.log(n * table[nz] / np.outer(pt, pk)[nz])).sum())
    denom = 0.5 * (_entropy(pt) + _entropy(pk))
    if denom <= 0:
        return 0.0
    return float(np.clip(mi / denom, 0.0, 1.0))


def fmi(true_labels, cluster_ids) -> float:
    table = contingency(true_labels, cluster_ids).astype(np.float64)
    tp = (table * (table - 1)).sum() / 2
    same_cluster = (table.sum(axis=0) * (table.sum(axis=0) - 1)).sum() / 2
    same_class = (table.sum(axis=1) * (table.sum(axis=1) - 1)).sum() / 2
    if same_cluster == 0 or same_class == 0:
        return 0.0
    return float(tp / np.sqrt(same_cluster * same_class))


# --- classification ------------------------------------------------------------

def accuracy(confusion: ConfusionMatrix) -> float:
    total = confusion.total
    return float(np.trace(confusion.counts) / total) if total else 0.0


def per_class_prf(confusion: ConfusionMatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    c = confusion.counts.astype(np.float64)
    tp = np.diag(c)
    pred = c.sum(axis=0)
    true = c.sum(axis=1)
    precision = np.divide(tp, pred, out=np.zeros_like(tp), where=pred > 0)
    recall = np.divide(tp, true, out=np.zeros_like(tp), where=true > 0)
    s = precision + recall
    f1 = np.divide(2 * precision * recall, s, out=np.zeros_like(tp), where=s > 0)
    return precision, recall, f1


def macro_f1(confusion: ConfusionMatrix) -> float:
    return float(per_class_prf(confusion)[2].mean())


def binary_auroc(scores, positive) -> float:
    """Mann-Whitney statistic with midranks for ties."""
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    n_pos, n_neg = positive.sum(), (~positive).sum()
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs both positive and negative samples")
    ranks = rankdata(scores)
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def macro_auroc(true_labels, probability_rows, return_skipped: bool = False):
    """One-vs-rest AUROC averaged over classes that appear in ``true_labels``.

    A class is also skipped when every sample belongs to it (no negatives).
    """
    t = _labels(true_labels)
    probs = np.asarray(probability_rows, dtype=np.float64)
    scores, skipped = [], []
    for c in range(probs.shape[1]):
        pos = t == c
        if pos.all() or not pos.any():
            skipped.append(c)
            continue
        scores.append(binary_auroc(probs[:, c], pos))
    value = float(np.mean(scores)) if scores else 0.0
    return (value, skipped) if return_skipped else value


# --- reports -------------------------------------------------------------------

@dataclass
class ClusteringReport:
    nmi: float
    cac: float
    fmi: float


@dataclass
class ClassificationReport:
    rac: float
    f1_macro: float
    auroc_macro: float
    precision: list[float] = field(default_factory=list)
    recall: list[float] = field(default_factory=list)
    f1: list[float] = field(default_factory=list)
    auroc_skipped_classes: list[int] = field(default_factory=list)


def clustering_report(true_labels, cluster_ids) -> ClusteringReport:
    return ClusteringReport(nmi(true_labels, cluster_ids),
                            clustering_accuracy(true_labels, cluster_ids),
                            fmi(true_labels, cluster_ids))


def classification_report(true_labels, probs, class_count: int) -> ClassificationReport:
    probs = np.asarray(probs, dtype=np.float64)
    pred = np.argmax(probs, axis=1)
    cm = ConfusionMatrix.from_labels(true_labels, pred, class_count)
    p, r, f = per_class_prf(cm)
    auc, skipped = macro_auroc(true_labels, probs, return_skipped=True)
    return ClassificationReport(accuracy(cm), float(f.mean()), auc,
                                p.tolist(), r.tolist(), f.tolist(), skipped)


def report_json(classification: ClassificationReport, clustering: ClusteringReport,
                extra: dict | None = None) -> str:
    doc = {"classification": asdict(classification), "clustering": asdict(clustering)}
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def format_table(rows: dict[str, dict[str, float]],
                 metrics=("RAC", "F1S", "AUROC", "NMI", "CAC", "FMI")) -> str:
    """Metric-by-dataset text table, values in percent."""
    names = list(rows)
    width = max([8] + [len(n) for n in names])
    lines = ["Metric".ljust(8) + "".join(n.rjust(width + 2) for n in names)]
    for m in metrics:
        cells = []
        for n in names:
            v = rows[n].get(m)
            cells.append(("-" if v is None else f"{100 * v:.1f}").rjust(width + 2))
        lines.append(m.ljust(8) + "".join(cells))
    return "\n".join(lines) + "\n"
