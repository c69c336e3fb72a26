"""Supervised, dual-contrastive and self-calibration objectives.

Every loss takes :class:`~scdc.nn.Tensor` inputs and returns a scalar Tensor,
so gradients flow back through the model. Contrastive similarities are cosine
similarities; zero vectors (e.g. an empty class column) get similarity 0.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .nn.functional import l2_normalize_rows, masked_logsumexp
from .nn.tensor import Tensor, as_tensor, concat

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ContrastConfig:
    tau: float = 0.2
    tau_e: float = 0.2
    epsilon: float = 0.2

    def __post_init__(self):
        if self.tau <= 0 or self.tau_e <= 0:
            raise ValueError("temperatures must be positive")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PseudoLabels:
    """Per-sample hard label (``-1`` when unconfident) and max probability."""

    labels: np.ndarray
    confidence: np.ndarray

    @property
    def mask(self) -> np.ndarray:
        return self.labels >= 0

    @property
    def confident_count(self) -> int:
        return int(self.mask.sum())

    def __len__(self) -> int:
        return len(self.labels)


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("cosine similarity of a zero vector is undefined")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def _log_prob(p: Tensor) -> Tensor:
    return p.clamp_min(PROB_FLOOR).log()


def _check_labels(labels: np.ndarray, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"label out of range for {n_classes} classes")
    return labels.astype(int)


def supervised_loss(probs: Tensor, labels) -> Tensor:
    """Mean cross-entropy ``-log p[i, y_i]`` over the batch."""
    probs = as_tensor(probs)
    labels = _check_labels(labels, probs.shape[1])
    picked = probs[np.arange(len(labels)), labels]
    return -_log_prob(picked).mean()


def _similarity_matrix(a: Tensor, b: Tensor, tau: float) -> Tensor:
    z = l2_normalize_rows(concat([a, b], axis=0))
    return (z @ z.T) * (1.0 / tau)


def _pair_terms(sim: Tensor, n: int) -> Tensor:
    """Per-anchor NT-Xent terms over ``2n`` stacked views.

    The positive of anchor ``a`` is ``a + n`` (mod ``2n``); the denominator
    runs over every other row entry.
    """
    idx = np.arange(2 * n)
    partner = (idx + n) % (2 * n)
    others = ~np.eye(2 * n, dtype=bool)
    return masked_logsumexp(sim, others) - sim[idx, partner]


def nt_xent_instance(zs: Tensor, zw: Tensor, tau: float = 0.2) -> Tensor:
    """Instance-level contrast of strong/weak embedding rows.

    Returns ``(1/B) * sum_i [l(z_i^s, z_i^w) + l(z_i^w, z_i^s)]``.
    """
    zs, zw = as_tensor(zs), as_tensor(zw)
    B = zs.shape[0]
    if B < 2:
        raise ValueError("no negatives available: need at least 2 samples")
    if zw.shape != zs.shape:
        raise ValueError("view embeddings must share a shape")
    return _pair_terms(_similarity_matrix(zs, zw, tau), B).sum() * (1.0 / B)


def column_entropy(probs: Tensor) -> Tensor:
    """Entropy of the batch's class-mass distribution ``colsum / B``."""
    probs = as_tensor(probs)
    mass = probs.sum(axis=0) * (1.0 / probs.shape[0])
    return -(mass * _log_prob(mass)).sum()


def category_contrast(ys: Tensor, yw: Tensor, tau: float = 0.2,
                      return_parts: bool = False):
    """Column-wise (class-level) contrast minus both views' mass entropies."""
    ys, yw = as_tensor(ys), as_tensor(yw)
    if ys.shape != yw.shape:
        raise ValueError("view predictions must share a shape")
    C = ys.shape[1]
    if C < 2:
        raise ValueError("category contrast needs at least 2 classes")
    contrast = _pair_terms(_similarity_matrix(ys.T, yw.T, tau), C).sum() * (1.0 / C)
    entropy = column_entropy(ys) + column_entropy(yw)
    total = contrast - entropy
    if return_parts:
        return total, contrast, entropy
    return total


def select_pseudo_labels(yw, epsilon: float) -> PseudoLabels:
    """Argmax of each weak-view row when its maximum reaches ``epsilon``."""
    p = yw.data if isinstance(yw, Tensor) else np.asarray(yw, dtype=np.float64)
    arg = np.argmax(p, axis=1)
    conf = p[np.arange(len(p)), arg]
    labels = np.where(conf >= epsilon, arg, -1)
    return PseudoLabels(labels.astype(int), conf.copy())


def calibrated_embedding_loss(zs: Tensor, zw: Tensor, pseudo: PseudoLabels,
                              tau_e: float = 0.2, return_info: bool = False):
    """Pseudo-label supervised contrast in embedding space.

    A confident anchor contributes ``-log(sum_same / sum_diff)``: exp-similarities
    to embeddings of samples sharing its pseudo-label (anchor excluded, its
    other view included) over those of samples with another or no label.
    Anchors without a differing sample are skipped. Unconfident anchors use the
    instance-level term. The result is ``2 * mean`` over contributing anchors,
    which equals the instance loss's ``(1/B) * sum`` normalization.
    """
    zs, zw = as_tensor(zs), as_tensor(zw)
    B = zs.shape[0]
    if B < 2:
        raise ValueError("no negatives available: need at least 2 samples")
    if len(pseudo) != B:
        raise ValueError("pseudo-labels do not match batch size")
    sim = _similarity_matrix(zs, zw, tau_e)
    n = 2 * B
    lab = np.concatenate([pseudo.labels, pseudo.labels])
    conf = lab >= 0
    idx = np.arange(n)
    partner = (idx + B) % n
    others = ~np.eye(n, dtype=bool)

    # unconfident samples carry label -1, so they land in every confident
    # anchor's negative set
    same = (lab[:, None] == lab[None, :]) & conf[:, None] & others
    diff = (lab[:, None] != lab[None, :]) & conf[:, None]

    cal_rows = conf & diff.any(axis=1)
    inst_rows = ~conf
    skipped = int(conf.sum() - cal_rows.sum())

    parts = []
    if inst_rows.any():
        inst = masked_logsumexp(sim, others) - sim[idx, partner]
        parts.append(inst[np.flatnonzero(inst_rows)])
    if cal_rows.any():
        rows = np.flatnonzero(cal_rows)
        sub = sim[rows]
        cal = masked_logsumexp(sub, diff[rows]) - masked_logsumexp(sub, same[rows])
        parts.append(cal)
    contributing = int(inst_rows.sum() + cal_rows.sum())
    if contributing == 0:
        log.debug("calibrated embedding loss: no negatives for any anchor")
        loss = (sim * 0.0).sum()
    else:
        total = parts[0].sum() if len(parts) == 1 else parts[0].sum() + parts[1].sum()
        loss = total * (2.0 / contributing)
    if return_info:
        return loss, {"skipped_anchors": skipped, "contributing_anchors": contributing,
                      "no_negatives": contributing == 0}
    return loss


def pseudo_supervision_loss(ys_pred: Tensor, pseudo: PseudoLabels) -> Tensor:
    """Cross-entropy of strong-view predictions against confident pseudo-labels."""
    ys_pred = as_tensor(ys_pred)
    rows = np.flatnonzero(pseudo.mask)
    if rows.size == 0:
        return (ys_pred * 0.0).sum()
    picked = ys_pred[rows, pseudo.labels[rows]]
    return -_log_prob(picked).mean()


@dataclass
class LossBreakdown:
    total: Tensor
    l_sup: float = 0.0
    l_cat: float = 0.0
    l_emb: float = 0.0
    l_pse: float = 0.0
    m_confident: int = 0

    def log_record(self, step: int) -> dict:
        return {"step": step, "l_sup": self.l_sup, "l_cat": self.l_cat,
                "l_emb": self.l_emb, "l_pse": self.l_pse,
                "m_confident": self.m_confident}


def unsupervised_objective(zs: Tensor, zw: Tensor, ys: Tensor, yw: Tensor,
                           cfg: ContrastConfig = ContrastConfig()) -> LossBreakdown:
    """``L_cat + L'_emb + L_pse`` with pseudo-labels taken from ``yw``."""
    pseudo = select_pseudo_labels(yw, cfg.epsilon)
    l_cat = category_contrast(ys, yw, cfg.tau)
    l_emb = calibrated_embedding_loss(zs, zw, pseudo, cfg.tau_e)
    l_pse = pseudo_supervision_loss(ys, pseudo)
    total = l_cat + l_emb + l_pse
    return LossBreakdown(total, 0.0, l_cat.item(), l_emb.item(), l_pse.item(),
                         pseudo.confident_count)


def semi_objective(l_sup, l_uns):
    """Unweighted sum of the supervised and unsupervised objectives."""
    if isinstance(l_uns, LossBreakdown):
        total = as_tensor(l_sup) + l_uns.total
        sup_val = l_sup.item() if isinstance(l_sup, Tensor) else float(l_sup)
        return LossBreakdown(total, sup_val, l_uns.l_cat, l_uns.l_emb, l_uns.l_pse,
                             l_uns.m_confident)
    return l_sup + l_uns
