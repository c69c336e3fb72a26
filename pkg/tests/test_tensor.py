import numpy as np
import pytest

from scdc.nn import Tensor, concat, no_grad, parameter

from gradcheck import max_relative_error


def rnd(*shape, seed=0):
    return np.random.default_rng(seed).normal(size=shape)


class TestBackwardBasics:
    def test_polynomial(self):
        x = parameter(3.0)
        y = x * x + x * 2.0
        y.backward()
        assert x.grad == pytest.approx(8.0)

    def test_reused_node_accumulates(self):
        x = parameter([1.0, 2.0])
        y = x * x
        (y + y).sum().backward()
        assert x.grad.tolist() == [4.0, 8.0]

    def test_leaf_grads_accumulate_across_calls(self):
        x = parameter(2.0)
        (x * 3.0).backward()
        (x * 3.0).backward()
        assert x.grad == 6.0
        x.zero_grad()
        assert x.grad is None

    def test_non_scalar_rejected(self):
        with pytest.raises(ValueError):
            (parameter([1.0, 2.0]) * 2.0).backward()

    def test_constant_rejected(self):
        with pytest.raises(ValueError):
            Tensor(1.0).backward()

    def test_constant_parent_gets_no_grad(self):
        c = Tensor([1.0, 2.0])
        x = parameter([3.0, 4.0])
        (c * x).sum().backward()
        assert c.grad is None
        assert x.grad.tolist() == [1.0, 2.0]

    def test_no_grad_builds_no_graph(self):
        x = parameter([1.0])
        with no_grad():
            y = x * 2.0
        assert not y.requires_grad

    def test_broadcast_reduces_gradient(self):
        x = parameter(np.ones((3, 2)))
        b = parameter(np.zeros(2))
        (x + b).sum().backward()
        assert b.grad.tolist() == [3.0, 3.0]

    def test_fancy_index_with_repeats(self):
        x = parameter([1.0, 2.0, 3.0])
        x[np.array([0, 0, 2])].sum().backward()
        assert x.grad.tolist() == [2.0, 0.0, 1.0]

    def test_clamp_min_blocks_gradient(self):
        x = parameter([1e-15, 0.5])
        x.clamp_min(1e-12).log().sum().backward()
        assert x.grad[0] == 0.0
        assert x.grad[1] == pytest.approx(2.0)


OPS = {
    "add": (lambda a, b: (a + b).sum(), [rnd(3, 4), rnd(4, seed=1)]),
    "sub": (lambda a, b: (a - b * b).sum(), [rnd(3, 4), rnd(3, 4, seed=1)]),
    "mul": (lambda a, b: (a * b).sum(), [rnd(2, 3), rnd(2, 3, seed=1)]),
    "div": (lambda a, b: (a / (b * b + 1.0)).sum(), [rnd(2, 3), rnd(2, 3, seed=1)]),
    "pow": (lambda a: ((a * a + 1.0) ** 1.5).sum(), [rnd(5)]),
    "matmul": (lambda a, b: ((a @ b) ** 2).sum(), [rnd(3, 4), rnd(4, 2, seed=1)]),
    "exp-log": (lambda a: ((a * 0.3).exp() + (a * a + 0.5).log()).sum(), [rnd(6)]),
    "sqrt": (lambda a: (a * a + 1.0).sqrt().sum(), [rnd(6)]),
    "mean-axis": (lambda a: (a.mean(axis=1) ** 2).sum(), [rnd(3, 5)]),
    "sum-keepdims": (lambda a: (a.sum(axis=0, keepdims=True) * a).sum(), [rnd(3, 2)]),
    "reshape-transpose": (lambda a: (a.reshape(6, 2).T @ a.reshape(6, 2)).sum(),
                          [rnd(3, 4)]),
    "getitem": (lambda a: (a[1:, ::2] ** 2).sum(), [rnd(4, 5)]),
    "concat": (lambda a, b: (concat([a, b], axis=1) ** 3).sum(), [rnd(2, 2), rnd(2, 3)]),
    "relu": (lambda a: (a.relu() * a).sum(), [rnd(8) + 0.05]),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_gradients_match_finite_differences(name):
    fn, arrays = OPS[name]
    assert max_relative_error(fn, arrays) < 1e-6


class TestDocumentedCases:
    def test_sum_gives_ones(self):
        p = parameter(np.arange(5.0))
        p.sum().backward()
        assert p.grad.tolist() == [1.0] * 5

    def test_sum_of_squares(self):
        v = np.array([1.5, -2.0, 0.25])
        p = parameter(v)
        (p * p).sum().backward()
        assert p.grad.tolist() == (2 * v).tolist()
