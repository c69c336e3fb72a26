"""Training loop: supervised batches from the annotated set interleaved with
contrastive batches from the unannotated set, one Adam step per iteration."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .augment import strong_values, weak_values
from .config import TrainConfig
from .losses import (LossBreakdown, semi_objective, supervised_loss,
                     unsupervised_objective)
from .metrics import (ClassificationReport, ClusteringReport, classification_report,
                      clustering_report)
from .model import ModelConfig, ScdcModel, argmax_confidence
from .nn.optim import Adam
from .nn.tensor import Tensor, concat
from .rng import RngStreams, seed_rng
from .spectra import LabeledSpectrum, SplitDataset, stack

log = logging.getLogger(__name__)


@dataclass
class EpochReport:
    epoch: int
    steps: int
    l_sup: float
    l_cat: float
    l_emb: float
    l_pse: float
    confident_rate: float
    seconds: float


@dataclass
class TrainResult:
    model: ScdcModel
    reports: list[EpochReport]
    checkpoint_path: str | None = None
    steps: int = 0


class CyclicSampler:
    """Endless batches drawn from reshuffled passes over ``n`` items."""

    def __init__(self, n: int, batch_size: int, streams: RngStreams, tag: str):
        self.n, self.batch_size, self.streams, self.tag = n, batch_size, streams, tag
        self.cycle = 0
        self.order = streams.stream(tag, 0).permutation(n)
        self.pos = 0

    def next(self) -> np.ndarray:
        out = []
        while len(out) < self.batch_size:
            if self.pos == self.n:
                self.cycle += 1
                self.order = self.streams.stream(self.tag, self.cycle).permutation(self.n)
                self.pos = 0
            take = min(self.batch_size - len(out), self.n - self.pos)
            out.extend(self.order[self.pos:self.pos + take])
            self.pos += take
        return np.asarray(out)


def epoch_batches(n: int, batch_size: int, streams: RngStreams, epoch: int) -> list[np.ndarray]:
    order = streams.stream("unlabeled-order", epoch).permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def steps_per_epoch(n_unlabeled: int, batch_size: int) -> int:
    full, rest = divmod(n_unlabeled, batch_size)
    return full + (1 if rest >= 2 else 0)


def make_views(x: np.ndarray, ids: Sequence[int], cfg: TrainConfig, streams: RngStreams,
               epoch: int) -> tuple[np.ndarray, np.ndarray]:
    """Weak and strong views of rows ``x[ids]``; substream per (epoch, sample)."""
    aug = cfg.augment
    weak, strong = [], []
    for i in ids:
        w_rng, s_rng = streams.stream("augment", epoch, int(i)).spawn(2)
        src = x[i]
        if aug.pairing == "weak+strong":
            w = weak_values(src, aug.weak, w_rng)
            s = strong_values(src, aug.strong, s_rng)
        elif aug.pairing == "weak-only":
            w = weak_values(src, aug.weak, w_rng)
            s = weak_values(src, aug.weak, s_rng)
        else:
            w = strong_values(src, aug.strong, w_rng)
            s = strong_values(src, aug.strong, s_rng)
        weak.append(w)
        strong.append(s)
    lo, hi = aug.clip
    return np.clip(np.stack(weak), lo, hi), np.clip(np.stack(strong), lo, hi)


def build_model(cfg: TrainConfig, class_count: int, input_length: int) -> ScdcModel:
    kw = {}
    if cfg.blocks is not None:
        kw["blocks"] = cfg.blocks
    mcfg = ModelConfig(class_count=class_count, input_length=input_length,
                       embed_dim=cfg.embed_dim, hidden_dim=cfg.hidden_dim, **kw)
    return ScdcModel(mcfg, seed_rng(cfg.seed).stream("init"))


def train(data: SplitDataset, cfg: TrainConfig, model: ScdcModel | None = None,
          config_echo: dict | None = None) -> TrainResult:
    """Run the epoch loop on preprocessed data.

    Epoch length is set by one pass over the unannotated pool; annotated batches
    cycle. ``mode="supervised"`` trains on the annotated set alone for the same
    number of steps (the ablation baseline).
    """
    streams = seed_rng(cfg.seed)
    annotated = list(data.annotated)
    unannotated = list(data.unannotated)
    if cfg.mode == "unsupervised" and annotated:
        log.warning("unsupervised mode: ignoring labels of %d annotated spectra",
                    len(annotated))
        unannotated = [a.spectrum for a in annotated] + unannotated
        annotated = []
    if cfg.mode in ("semi", "supervised") and not annotated:
        raise ValueError(f"{cfg.mode} mode needs a non-empty annotated set")
    if cfg.mode != "supervised" and len(unannotated) < 2:
        raise ValueError("need at least 2 unannotated spectra")

    xu = stack(unannotated) if unannotated else None
    xa = stack(annotated) if annotated else None
    ya = np.array([a.label for a in annotated], dtype=int)
    length = (xu if xu is not None else xa).shape[1]
    if model is None:
        model = build_model(cfg, data.class_count, length)
    model.train()
    params = model.parameters()
    opt = Adam(params, lr=cfg.lr)
    labeled = CyclicSampler(len(annotated), cfg.batch_size, streams, "labeled-order") \
        if annotated else None

    log_fh = open(cfg.log_path, "w", encoding="utf-8") if cfg.log_path else None
    reports, step = [], 0
    meta = {"class_count": data.class_count, "config": config_echo or {}}
    try:
        for epoch in range(cfg.epochs):
            t0 = time.perf_counter()
            sums = np.zeros(5)
            batches = epoch_batches(len(unannotated) or len(annotated), cfg.batch_size,
                                    streams, epoch)
            taken = 0
            for batch in batches:
                if len(batch) < 2:
                    log.warning("epoch %d: skipping batch of %d sample(s)", epoch, len(batch))
                    continue
                br = _train_step(model, opt, cfg, streams, epoch, step, xu, batch,
                                 xa, ya, labeled)
                rec = br.log_record(step)
                if log_fh:
                    log_fh.write(json.dumps(rec) + "\n")
                sums += [br.l_sup, br.l_cat, br.l_emb, br.l_pse,
                         br.m_confident / len(batch) if cfg.mode != "supervised" else 0.0]
                step += 1
                taken += 1
            means = sums / max(taken, 1)
            reports.append(EpochReport(epoch, taken, *means.tolist(),
                                       time.perf_counter() - t0))
            log.info("epoch %d: sup %.4f cat %.4f emb %.4f pse %.4f conf %.2f",
                     epoch, *means.tolist())
            if cfg.checkpoint_path:
                model.save(cfg.checkpoint_path, {**meta, "epoch": epoch, "steps": step})
    finally:
        if log_fh:
            log_fh.close()
    model.eval()
    return TrainResult(model, reports, cfg.checkpoint_path, step)


def _train_step(model, opt, cfg, streams, epoch, step, xu, batch, xa, ya, labeled):
    parts = []
    n_lab = 0
    lab_idx = None
    if cfg.mode in ("semi", "supervised"):
        lab_idx = labeled.next()
        xl = xa[lab_idx]
        if cfg.augment.labeled == "weak":
            xl = np.stack([weak_values(xa[i], cfg.augment.weak,
                                       streams.stream("labeled-augment", step, k))
                           for k, i in enumerate(lab_idx)])
            xl = np.clip(xl, *cfg.augment.clip)
        parts.append(xl)
        n_lab = len(lab_idx)
    if cfg.mode != "supervised":
        weak, strong = make_views(xu, batch, cfg, streams, epoch)
        parts += [weak, strong]

    opt.zero_grad()
    h = model.encode(Tensor(np.concatenate(parts)))
    probs = model.category_head(h)
    l_sup = supervised_loss(probs[:n_lab], ya[lab_idx]) if n_lab else None
    if cfg.mode == "supervised":
        br = LossBreakdown(l_sup, l_sup.item())
    else:
        B = len(batch)
        hw, hs = h[n_lab:n_lab + B], h[n_lab + B:]
        z = model.embed_head(concat([hw, hs]))
        zw, zs = z[:B], z[B:]
        yw, ys = probs[n_lab:n_lab + B], probs[n_lab + B:]
        br = unsupervised_objective(zs, zw, ys, yw, cfg.contrast)
        if l_sup is not None:
            br = semi_objective(l_sup, br)
    br.total.backward()
    opt.step()
    return br


# --- evaluation -------------------------------------------------------------------

def evaluate_model(model: ScdcModel, test: Sequence[LabeledSpectrum],
                   class_count: int | None = None
                   ) -> tuple[ClassificationReport, ClusteringReport]:
    if class_count is not None and class_count != model.config.class_count:
        raise ValueError(f"checkpoint has {model.config.class_count} classes, "
                         f"data declares {class_count}")
    y = np.array([t.label for t in test], dtype=int)
    if y.size and y.max() >= model.config.class_count:
        raise ValueError(f"test label {y.max()} outside the checkpoint's "
                         f"{model.config.class_count} classes")
    probs = model.predict_proba(stack(test))
    pred, _ = argmax_confidence(probs)
    return (classification_report(y, probs, model.config.class_count),
            clustering_report(y, pred))


def evaluate_checkpoint(checkpoint, test: Sequence[LabeledSpectrum],
                        class_count: int | None = None):
    """Eval-mode predictions on ``test`` scored as classification and clustering."""
    model = checkpoint if isinstance(checkpoint, ScdcModel) else ScdcModel.load(checkpoint)[0]
    return evaluate_model(model, test, class_count)
