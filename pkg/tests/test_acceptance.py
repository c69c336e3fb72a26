"""Acceptance suite: one test per criterion, summarized by tests/conftest.py.

Criteria 5 and 6 train the full benchmark ablation (about 20 minutes on one core).
"""
import json
import time
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from scdc import benchmark as bm
from scdc.cli import main
from scdc.losses import (ContrastConfig, PseudoLabels, calibrated_embedding_loss,
                         category_contrast, nt_xent_instance, pseudo_supervision_loss,
                         select_pseudo_labels, supervised_loss, unsupervised_objective)
from scdc.metrics import (binary_auroc, clustering_accuracy, fmi, hungarian_match, macro_auroc,
                          nmi)
from scdc.model import ConvBlockSpec, ModelConfig, ScdcModel
from scdc.nn import (Tensor, batchnorm1d, conv1d, l2_normalize_rows, linear, masked_logsumexp,
                     maxpool1d, softmax_rows)
from scdc.nn.functional import bn_relu_pool

import oracles
from gradcheck import max_relative_error

ROOT = Path(__file__).resolve().parents[1]


def softmax(x):
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def val(t):
    return float(t.data) if isinstance(t, Tensor) else float(t)


def loss_fixture(seed):
    rng = np.random.default_rng(1000 + seed)
    B, C, E = rng.integers(2, 7), rng.integers(2, 5), rng.integers(2, 9)
    return dict(zs=rng.normal(size=(B, E)), zw=rng.normal(size=(B, E)),
                ys=softmax(rng.normal(size=(B, C)) * 2), yw=softmax(rng.normal(size=(B, C)) * 2),
                labels=rng.integers(0, C, B), eps=float(rng.uniform(0.3, 0.9)),
                tau=float(rng.uniform(0.1, 1.0)))


@pytest.mark.criterion(1, "loss oracle suite")
def test_criterion_1_loss_oracles(record_property):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        f = loss_fixture(seed)
        zs, zw, ys, yw, tau, eps = f["zs"], f["zw"], f["ys"], f["yw"], f["tau"], f["eps"]
        ours, theirs = select_pseudo_labels(yw, eps), oracles.pseudo_labels(yw, eps)
        assert [None if k < 0 else k for k in ours.labels.tolist()] == theirs
        pairs = [
            (supervised_loss(ys, f["labels"]), oracles.supervised(ys, f["labels"])),
            (nt_xent_instance(zs, zw, tau), oracles.nt_xent(zs, zw, tau)),
            (category_contrast(ys, yw, tau), oracles.category_contrast(ys, yw, tau)),
            (calibrated_embedding_loss(zs, zw, ours, tau), oracles.calibrated(zs, zw, theirs, tau)),
            (pseudo_supervision_loss(ys, ours), oracles.pseudo_supervision(ys, theirs)),
            (unsupervised_objective(zs, zw, ys, yw, ContrastConfig(tau, tau, eps)).total,
             oracles.category_contrast(ys, yw, tau) + oracles.calibrated(zs, zw, theirs, tau)
             + oracles.pseudo_supervision(ys, theirs)),
        ]
        worst = max([worst] + [abs(val(a) - b) for a, b in pairs])
    seconds = time.perf_counter() - t0
    record_property("detail", f"20 fixtures, max abs error {worst:.1e}, {seconds:.1f}s")
    assert worst <= 1e-9
    assert seconds < 10


def _gradient_cases(rng):
    r = lambda *s: rng.normal(size=s)
    proj = lambda *s: rng.normal(size=s)
    p_conv, p_bn, p_pool, p_block = proj(2, 3, 8), proj(3, 2, 6), proj(2, 3, 3), proj(2, 3, 3)
    p_lin, p_soft, p_norm = proj(4, 3), proj(4, 3), proj(4, 5)
    mask = rng.random((4, 5)) < 0.7
    mask[:, 0] = True
    zs, zw, a, b = r(4, 5), r(4, 5), r(4, 3), r(4, 3)
    y = rng.integers(0, 3, 4)
    fixed = select_pseudo_labels(softmax(b), 0.4)
    half = PseudoLabels(np.array([0, -1, 2, 0]), np.full(4, 0.5))
    rm, rv = r(2), np.abs(r(2)) + 0.5
    return {
        "conv1d": (lambda x, w, c: (conv1d(x, w, c, padding="same") * p_conv).sum(),
                   [r(2, 2, 8), r(3, 2, 5), r(3)]),
        "batchnorm-train": (lambda x, g, c: (batchnorm1d(x, g, c, rm.copy(), rv.copy(), True)
                                             * p_bn).sum(), [r(3, 2, 6), r(2), r(2)]),
        "batchnorm-eval": (lambda x, g, c: (batchnorm1d(x, g, c, rm.copy(), rv.copy(), False)
                                            * p_bn).sum(), [r(3, 2, 6), r(2), r(2)]),
        "maxpool": (lambda x: (maxpool1d(x, 4) * p_pool).sum(), [r(2, 3, 12)]),
        "bn-relu-pool": (lambda x, g, c: (bn_relu_pool(x, g, c, np.zeros(3), np.ones(3), True, 4)
                                          * p_block).sum(), [r(2, 3, 12), r(3), r(3)]),
        "relu": (lambda x: (x.relu() * x).sum(), [r(8) + 0.05]),
        "linear": (lambda x, w, c: (linear(x, w, c) * p_lin).sum(), [r(4, 5), r(5, 3), r(3)]),
        "softmax": (lambda x: (softmax_rows(x) * p_soft).sum(), [r(4, 3)]),
        "l2-normalize": (lambda x: (l2_normalize_rows(x) * p_norm).sum(), [r(4, 5)]),
        "masked-logsumexp": (lambda x: masked_logsumexp(x, mask).sum(), [r(4, 5)]),
        "supervised": (lambda a: supervised_loss(softmax_rows(a), y), [a]),
        "instance": (lambda u, v: nt_xent_instance(u, v), [zs, zw]),
        "category": (lambda a, b: category_contrast(softmax_rows(a), softmax_rows(b)), [a, b]),
        "calibrated": (lambda u, v: calibrated_embedding_loss(u, v, half), [zs, zw]),
        "pseudo-supervision": (lambda a: pseudo_supervision_loss(softmax_rows(a), fixed), [a]),
        "objective": (lambda u, v, a, b: category_contrast(softmax_rows(a), softmax_rows(b))
                      + calibrated_embedding_loss(u, v, fixed)
                      + pseudo_supervision_loss(softmax_rows(a), fixed), [zs, zw, a, b]),
    }


def _model_case(rng):
    cfg = ModelConfig(class_count=3, input_length=16, embed_dim=4, hidden_dim=5,
                      blocks=(ConvBlockSpec(3, 3, 2), ConvBlockSpec(4, 3, 2)))
    m = ScdcModel(cfg, rng)
    x = rng.normal(size=(4, 16))
    proj = rng.normal(size=(4, 4))
    names = sorted(m.params)

    def fn(*arrays):
        for n, a in zip(names, arrays):
            m.params[n] = a
        return (m.embed_head(m.encode(x)) * proj).sum() + m.category_head(m.encode(x))[:, 0].sum()

    return fn, [m.params[n].data.copy() for n in names]


@pytest.mark.criterion(2, "gradient suite")
def test_criterion_2_gradients(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    errors = {name: max_relative_error(fn, arrays)
              for name, (fn, arrays) in _gradient_cases(rng).items()}
    errors["model"] = max_relative_error(*_model_case(rng))
    seconds = time.perf_counter() - t0
    worst = max(errors, key=errors.get)
    record_property("detail", f"{len(errors)} cases, worst {worst} {errors[worst]:.1e}, "
                              f"{seconds:.1f}s")
    assert errors[worst] < 1e-3
    assert seconds < 60


@pytest.mark.criterion(3, "degeneracy chain")
def test_criterion_3_degeneracy():
    for seed in range(10):
        f = loss_fixture(seed)
        zs, zw, ys, yw, tau = f["zs"], f["zw"], f["ys"], f["yw"], f["tau"]
        eps = float(yw.max()) + 1e-9 if yw.max() < 1 else 1.0
        cfg = ContrastConfig(tau, tau, min(eps, 1.0))
        br = unsupervised_objective(zs, zw, ys, yw, cfg)
        assert br.m_confident == 0
        assert br.l_emb == val(nt_xent_instance(zs, zw, tau))
        assert br.l_pse == 0.0
        assert abs(val(br.total) - (br.l_cat + br.l_emb)) <= 1e-12


@pytest.mark.criterion(4, "metric oracle suite")
def test_criterion_4_metric_oracles(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    for k in range(20):
        K = int(rng.integers(2, 7))
        cost = rng.integers(0, 20, (K, K)).astype(float)
        assert hungarian_match(cost)[1] == oracles.min_cost_permutation(cost.tolist())
        n = int(rng.integers(2, 41))
        t, p = rng.integers(0, K, n), rng.integers(0, K, n)
        assert clustering_accuracy(t, p) == pytest.approx(
            oracles.best_assignment_accuracy(t.tolist(), p.tolist()), abs=1e-10)
        assert fmi(t, p) == pytest.approx(oracles.fmi_pairs(t.tolist(), p.tolist()), abs=1e-10)
        assert nmi(t, p) == pytest.approx(oracles.nmi_direct(t.tolist(), p.tolist()), abs=1e-10)
        scores = rng.integers(0, 5, n).astype(float)
        pos = rng.random(n) < 0.5
        pos[0], pos[-1] = True, False
        assert binary_auroc(scores, pos) == pytest.approx(
            oracles.auroc_pairs(scores.tolist(), pos.tolist()), abs=1e-10)
    seconds = time.perf_counter() - t0
    record_property("detail", f"20 fixtures per metric, {seconds:.1f}s")
    assert seconds < 10


# --- desk-scale ablation -------------------------------------------------------

class Ablation:
    """Trains each benchmark variant at most once per session."""

    def __init__(self):
        self.data = bm.benchmark_data()
        self.runs = {}
        self.kmeans = None
        self.kmeans_seconds = 0.0

    def variant(self, name):
        if name not in self.runs:
            self.runs[name] = [bm.run_variant(self.data, name, s) for s in bm.SEEDS]
        return self.runs[name]

    def median(self, name, field_name):
        return float(np.median([getattr(r, field_name) for r in self.variant(name)]))

    def kmeans_median(self):
        if self.kmeans is None:
            t0 = time.perf_counter()
            self.kmeans = [bm.kmeans_cac(self.data, s) for s in bm.SEEDS]
            self.kmeans_seconds = time.perf_counter() - t0
        return float(np.median(self.kmeans))

    def seconds(self, names):
        return sum(r.seconds for n in names for r in self.variant(n)) + self.kmeans_seconds


@pytest.fixture(scope="session")
def ablation():
    return Ablation()


@pytest.mark.criterion(5, "desk-scale ablation")
def test_criterion_5_ablation(ablation, record_property):
    semi = ablation.median("semi", "rac")
    sup = ablation.median("supervised", "rac")
    uns = ablation.median("unsupervised", "cac")
    km = ablation.kmeans_median()
    seconds = ablation.seconds(["semi", "supervised", "unsupervised"])
    record_property("detail", f"semi RAC {semi:.3f} vs supervised {sup:.3f}; unsupervised CAC "
                              f"{uns:.3f} vs k-means {km:.3f}; {seconds / 60:.1f} min")
    assert semi >= sup + 0.05
    assert uns >= km + 0.05
    assert seconds < 15 * 60


@pytest.mark.criterion(6, "augmentation hierarchy")
def test_criterion_6_augmentation(ablation, record_property):
    both = ablation.median("semi", "rac")
    strong = ablation.median("strong-only", "rac")
    weak = ablation.median("weak-only", "rac")
    record_property("detail", f"weak+strong {both:.3f}, strong-only {strong:.3f}, "
                              f"weak-only {weak:.3f}")
    assert both >= strong


@pytest.mark.criterion(7, "determinism")
def test_criterion_7_determinism(tmp_path, record_property):
    doc = json.loads((ROOT / "configs" / "benchmark.json").read_text())
    doc["train"]["epochs"] = 2
    doc["outputs"] = {"checkpoint": "model.ckpt"}
    (tmp_path / "exp.json").write_text(json.dumps(doc))
    blobs = []
    for _ in range(2):
        assert main(["train", "--config", str(tmp_path / "exp.json")]) == 0
        blobs.append(((tmp_path / "model.ckpt").read_bytes(),
                      (tmp_path / "model.ckpt.log.jsonl").read_bytes()))
    record_property("detail", f"checkpoint {len(blobs[0][0])} bytes, "
                              f"log {len(blobs[0][1].splitlines())} lines")
    assert blobs[0][0] == blobs[1][0]
    assert blobs[0][1] == blobs[1][1]


# --- invariance suite ----------------------------------------------------------

_FAST = settings(max_examples=25, deadline=None,
                 suppress_health_check=[HealthCheck.too_slow])

seeds = st.integers(0, 10**6)


@_FAST
@given(seeds, st.floats(0.01, 100.0))
def _scale_invariance(seed, scale):
    f = loss_fixture(seed)
    zs, zw, tau = f["zs"], f["zw"], f["tau"]
    pseudo = select_pseudo_labels(f["yw"], f["eps"])
    assert val(nt_xent_instance(zs * scale, zw * scale, tau)) == pytest.approx(
        val(nt_xent_instance(zs, zw, tau)), abs=1e-9)
    assert val(calibrated_embedding_loss(zs * scale, zw * scale, pseudo, tau)) == pytest.approx(
        val(calibrated_embedding_loss(zs, zw, pseudo, tau)), abs=1e-9)


@_FAST
@given(seeds)
def _loss_permutations(seed):
    f = loss_fixture(seed)
    rng = np.random.default_rng(seed)
    zs, zw, ys, yw, tau = f["zs"], f["zw"], f["ys"], f["yw"], f["tau"]
    rows, cols = rng.permutation(len(zs)), rng.permutation(ys.shape[1])
    assert val(nt_xent_instance(zs[rows], zw[rows], tau)) == pytest.approx(
        val(nt_xent_instance(zs, zw, tau)), abs=1e-9)
    assert val(category_contrast(ys[:, cols], yw[:, cols], tau)) == pytest.approx(
        val(category_contrast(ys, yw, tau)), abs=1e-9)


@_FAST
@given(seeds)
def _metric_permutations(seed):
    rng = np.random.default_rng(seed)
    n, K = int(rng.integers(2, 41)), int(rng.integers(2, 6))
    t, p = rng.integers(0, K, n), rng.integers(0, K, n)
    order, rename = rng.permutation(n), rng.permutation(K) + 10
    for metric in (clustering_accuracy, nmi, fmi):
        base = metric(t, p)
        assert metric(t[order], p[order]) == pytest.approx(base, abs=1e-12)
        assert metric(t, rename[p]) == pytest.approx(base, abs=1e-12)
    probs = softmax(rng.normal(size=(n, K)))
    assert macro_auroc(t[order], probs[order]) == pytest.approx(macro_auroc(t, probs), abs=1e-12)


@_FAST
@given(seeds, st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def _pseudo_label_monotone(seed, e1, e2):
    lo, hi = sorted((e1, e2))
    yw = softmax(np.random.default_rng(seed).normal(size=(8, 4)) * 2)
    a, b = select_pseudo_labels(yw, lo), select_pseudo_labels(yw, hi)
    assert not np.any(b.mask & ~a.mask)
    assert b.confident_count <= a.confident_count


@pytest.mark.criterion(8, "invariance suite")
def test_criterion_8_invariances(record_property):
    t0 = time.perf_counter()
    for check in (_scale_invariance, _loss_permutations, _metric_permutations,
                  _pseudo_label_monotone):
        check()
    seconds = time.perf_counter() - t0
    record_property("detail", f"4 properties x 25 examples, {seconds:.1f}s")
    assert seconds < 10
