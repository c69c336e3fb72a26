import json
import logging

import numpy as np
import pytest

from scdc.config import TrainConfig
from scdc.losses import ContrastConfig
from scdc.model import ModelConfig, ScdcModel
from scdc.spectra import LabeledSpectrum, Spectrum, SplitDataset
from scdc.trainer import (CyclicSampler, evaluate_checkpoint, evaluate_model, make_views,
                          steps_per_epoch, train)
from scdc.rng import seed_rng

L = 64


def tiny_data(n_unlabelled=64, per_class=2, classes=3, n_test=12, seed=0):
    rng = np.random.default_rng(seed)
    axis = np.arange(L, dtype=float)

    def draw(c):
        x = np.exp(-0.5 * ((axis - 10 - 20 * c) / 3) ** 2) + 0.05 * rng.normal(size=L)
        return (x - x.min()) / (x.max() - x.min())

    ann = [LabeledSpectrum(Spectrum(draw(c), axis, f"a{c}_{j}"), c)
           for c in range(classes) for j in range(per_class)]
    unl = [Spectrum(draw(k % classes), axis, f"u{k}") for k in range(n_unlabelled)]
    test = [LabeledSpectrum(Spectrum(draw(k % classes), axis, f"t{k}"), k % classes)
            for k in range(n_test)]
    return SplitDataset(ann, unl, test, classes)


def cfg(**kw):
    base = dict(epochs=1, batch_size=32, embed_dim=8, hidden_dim=16, seed=3)
    base.update(kw)
    return TrainConfig(**base)


class TestCounting:
    def test_two_steps(self):
        result = train(tiny_data(64), cfg())
        assert result.steps == 2
        assert steps_per_epoch(64, 32) == 2

    def test_trailing_singleton_skipped(self, caplog):
        with caplog.at_level(logging.WARNING):
            result = train(tiny_data(65), cfg())
        assert result.steps == 2
        assert steps_per_epoch(65, 32) == 2
        assert "skipping batch of 1" in caplog.text

    def test_supervised_uses_same_step_count(self):
        assert train(tiny_data(64), cfg(mode="supervised")).steps == 2

    def test_cyclic_sampler_covers_items(self):
        s = CyclicSampler(5, 3, seed_rng(0), "t")
        seen = np.concatenate([s.next() for _ in range(5)])
        assert len(seen) == 15
        assert sorted(seen[:5].tolist()) == list(range(5))
        assert sorted(seen[5:10].tolist()) == list(range(5))


class TestLogging:
    def test_log_lines_match_steps(self, tmp_path):
        log = tmp_path / "run.jsonl"
        result = train(tiny_data(64), cfg(epochs=2, log_path=str(log)))
        lines = [json.loads(x) for x in log.read_text().splitlines()]
        assert len(lines) == result.steps == 4
        assert [r["step"] for r in lines] == [0, 1, 2, 3]
        for r in lines:
            assert all(np.isfinite(r[k]) for k in ("l_sup", "l_cat", "l_emb", "l_pse"))

    def test_zero_epsilon_everything_confident(self, tmp_path):
        log = tmp_path / "run.jsonl"
        train(tiny_data(64), cfg(contrast=ContrastConfig(epsilon=0.0), log_path=str(log)))
        assert all(json.loads(x)["m_confident"] == 32 for x in log.read_text().splitlines())

    def test_unsupervised_ignores_labels(self, caplog, tmp_path):
        log = tmp_path / "run.jsonl"
        with caplog.at_level(logging.WARNING):
            result = train(tiny_data(58), cfg(mode="unsupervised", log_path=str(log)))
        assert "ignoring labels" in caplog.text
        # 58 unannotated plus 6 former annotated spectra
        assert result.steps == 2
        assert all(json.loads(x)["l_sup"] == 0.0 for x in log.read_text().splitlines())


class TestDeterminism:
    def test_bitwise_identical(self, tmp_path):
        paths = []
        for k in range(2):
            ck, lg = tmp_path / f"m{k}.ckpt", tmp_path / f"m{k}.jsonl"
            train(tiny_data(40), cfg(epochs=2, checkpoint_path=str(ck), log_path=str(lg)))
            paths.append((ck.read_bytes(), lg.read_bytes()))
        assert paths[0] == paths[1]

    def test_seed_matters(self, tmp_path):
        a = train(tiny_data(40), cfg(seed=1)).model.state_arrays()
        b = train(tiny_data(40), cfg(seed=2)).model.state_arrays()
        assert not np.array_equal(a["cat.1.w"], b["cat.1.w"])

    def test_views_clipped_and_deterministic(self):
        x = np.tile(np.linspace(0, 1, L), (4, 1))
        c = cfg()
        w1, s1 = make_views(x, [0, 2], c, seed_rng(0), 0)
        w2, s2 = make_views(x, [0, 2], c, seed_rng(0), 0)
        assert np.array_equal(w1, w2) and np.array_equal(s1, s2)
        assert w1.min() >= -0.5 and s1.max() <= 1.5


class TestPreconditions:
    def test_semi_without_annotations(self):
        data = tiny_data()
        data = SplitDataset([], data.unannotated, data.test, 3)
        with pytest.raises(ValueError):
            train(data, cfg())

    def test_too_few_unannotated(self):
        with pytest.raises(ValueError):
            train(tiny_data(1), cfg())


class TestEvaluate:
    def _fixed_model(self, classes=4, logits_for=None):
        m = ScdcModel(ModelConfig(class_count=classes, input_length=L, embed_dim=4,
                                  hidden_dim=4))
        m.params["cat.1.w"].data[:] = 0
        m.params["cat.1.b"].data[:] = 0
        return m.eval()

    def _test_set(self, labels):
        axis = np.arange(L, dtype=float)
        return [LabeledSpectrum(Spectrum(np.full(L, 0.5), axis, f"t{k}"), c)
                for k, c in enumerate(labels)]

    def test_constant_prediction(self):
        m = self._fixed_model()
        m.params["cat.1.b"].data[2] = 5.0
        cls, clu = evaluate_checkpoint(m, self._test_set([0, 1, 2, 3] * 3), 4)
        assert cls.rac == 0.25
        assert clu.cac == 0.25 and clu.nmi == 0.0

    def test_perfect_classifier(self, monkeypatch):
        m = self._fixed_model(classes=2)
        test = self._test_set([0, 1, 1, 0])
        onehot = np.eye(2)[[0, 1, 1, 0]]
        monkeypatch.setattr(m, "predict_proba", lambda x: onehot)
        cls, clu = evaluate_model(m, test, 2)
        assert (cls.rac, cls.f1_macro, cls.auroc_macro) == (1.0, 1.0, 1.0)
        assert (clu.cac, clu.nmi, clu.fmi) == (1.0, 1.0, 1.0)

    def test_class_count_mismatch(self):
        with pytest.raises(ValueError):
            evaluate_checkpoint(self._fixed_model(), self._test_set([0, 1]), 3)

    def test_loads_path(self, tmp_path):
        m = self._fixed_model()
        m.save(tmp_path / "m.ckpt")
        cls, _ = evaluate_checkpoint(tmp_path / "m.ckpt", self._test_set([0, 0]), 4)
        assert cls.rac == 1.0

    def test_accuracy_matches_confusion_trace(self):
        data = tiny_data(64)
        model = train(data, cfg(epochs=3)).model
        cls, _ = evaluate_model(model, data.test, 3)
        pred = model.predict_class(np.stack([t.spectrum.intensities for t in data.test]))[0]
        y = np.array([t.label for t in data.test])
        cm = np.zeros((3, 3), int)
        np.add.at(cm, (y, pred), 1)
        assert cls.rac == np.trace(cm) / len(y)
