"""Tensor primitives against independent oracles and their invariants."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from outfitrec.errors import DimensionError, DomainError
from outfitrec.optim import grad_check
from outfitrec.tensor import (Tensor, concat, cosine_similarity, matmul,
                              parameter, pool_rows, signed_sqrt, softmax)


def naive_matmul(a, b):
    """Triple-loop matrix product oracle."""
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for l in range(k):
                s += a[i, l] * b[l, j]
            out[i, j] = s
    return out


class TestMatmul:
    def test_identity(self):
        v = np.arange(3.0).reshape(3, 1)
        out = matmul(Tensor(np.eye(3)), Tensor(v))
        np.testing.assert_array_equal(out.data, v)

    def test_hand_2x2(self):
        a = Tensor([[1.0, 2.0], [3.0, 4.0]])
        b = Tensor([[1.0], [1.0]])
        np.testing.assert_array_equal(matmul(a, b).data, [[3.0], [7.0]])

    def test_against_triple_loop_oracle(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(5, 7))
        b = rng.normal(size=(7, 3))
        np.testing.assert_allclose(matmul(Tensor(a), Tensor(b)).data,
                                   naive_matmul(a, b), rtol=0, atol=1e-12)

    def test_random_shapes_up_to_16(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n, k, m = rng.integers(1, 17, size=3)
            a = rng.normal(size=(n, k))
            b = rng.normal(size=(k, m))
            np.testing.assert_allclose(matmul(Tensor(a), Tensor(b)).data,
                                       naive_matmul(a, b), rtol=0, atol=1e-12)

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(DimensionError, match=r"\(2, 3\).*\(4, 2\)"):
            matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))

    def test_batched_broadcast(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(4, 3, 5))
        w = rng.normal(size=(5, 2))
        out = matmul(Tensor(a), Tensor(w)).data
        for i in range(4):
            np.testing.assert_allclose(out[i], naive_matmul(a[i], w), atol=1e-12)


class TestSoftmax:
    def test_symmetry(self):
        np.testing.assert_allclose(softmax(Tensor([0.0, 0.0])).data, [0.5, 0.5])

    def test_stability_no_overflow(self):
        out = softmax(Tensor([1000.0, 0.0])).data
        assert np.all(np.isfinite(out))
        assert out[0] == pytest.approx(1.0)
        assert out[1] == pytest.approx(0.0, abs=1e-300)

    def test_against_extended_precision_oracle(self):
        import mpmath
        mpmath.mp.dps = 50
        vals = [1.0, 2.0, 3.0]
        exps = [mpmath.e ** v for v in vals]
        total = sum(exps)
        expected = [float(e / total) for e in exps]
        np.testing.assert_allclose(softmax(Tensor(vals)).data, expected,
                                   rtol=1e-14)

    def test_empty_input_rejected(self):
        with pytest.raises(DomainError):
            softmax(Tensor(np.zeros(0)))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=12),
           st.floats(-100, 100))
    def test_normalization_and_shift_invariance(self, vals, shift):
        base = softmax(Tensor(vals)).data
        assert base.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(base > 0)
        shifted = softmax(Tensor([v + shift for v in vals])).data
        np.testing.assert_allclose(base, shifted, atol=1e-9)


class TestCosine:
    def test_identity(self):
        v = Tensor([1.0, 2.0, -3.0])
        assert cosine_similarity(v, v).item() == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine_similarity(Tensor([1.0, 0.0]),
                                 Tensor([0.0, 1.0])).item() == pytest.approx(0.0)
        assert cosine_similarity(Tensor([1.0, 1.0]),
                                 Tensor([1.0, -1.0])).item() == pytest.approx(0.0)

    def test_zero_vector_rejected(self):
        with pytest.raises(DomainError):
            cosine_similarity(Tensor([0.0, 0.0]), Tensor([1.0, 0.0]))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.01, 100), st.floats(0.01, 100))
    def test_symmetry_bound_and_scale_invariance(self, seed, alpha, beta):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=5) + 0.01
        y = rng.normal(size=5) + 0.01
        c_xy = cosine_similarity(Tensor(x), Tensor(y)).item()
        c_yx = cosine_similarity(Tensor(y), Tensor(x)).item()
        assert c_xy == pytest.approx(c_yx, abs=1e-12)
        assert abs(c_xy) <= 1.0 + 1e-12
        scaled = cosine_similarity(Tensor(alpha * x), Tensor(beta * y)).item()
        assert scaled == pytest.approx(c_xy, abs=1e-9)


class TestElementwise:
    def test_tanh_relu_basics(self):
        assert Tensor([0.0]).tanh().item() == 0.0
        assert Tensor([-3.0]).relu().item() == 0.0
        assert Tensor([3.0]).relu().item() == 3.0

    def test_column_broadcast_add_matches_loop_oracle(self):
        rng = np.random.default_rng(3)
        mat = rng.normal(size=(4, 3))
        vec = rng.normal(size=4)
        out = (Tensor(mat) + Tensor(vec.reshape(4, 1))).data
        expected = mat.copy()
        for col in range(3):
            for row in range(4):
                expected[row, col] = mat[row, col] + vec[row]
        np.testing.assert_allclose(out, expected, atol=1e-15)

    def test_non_broadcastable_shapes_rejected(self):
        with pytest.raises(ValueError):
            _ = Tensor(np.zeros((4, 3))) + Tensor(np.zeros((5, 2)))

    def test_finite_outputs_on_finite_inputs(self):
        rng = np.random.default_rng(4)
        x = Tensor(rng.normal(size=(3, 4)) * 100)
        for out in (x.tanh(), x.relu(), softmax(x, axis=-1), signed_sqrt(x)):
            assert np.all(np.isfinite(out.data))


class TestGradients:
    """Tape gradients of each differentiable primitive vs central FD
    at h = 1e-3 * max(1, |p|), rel err < 1e-4 (smooth compositions)."""

    def _check(self, make_loss, shape, seed=0):
        rng = np.random.default_rng(seed)
        p = parameter(rng.normal(size=shape))
        report = grad_check(lambda: make_loss(p), [("p", p)],
                            h_scale=1e-3, rel_tol=1e-4)
        assert report.passed, str(report)

    def test_matmul(self):
        w = Tensor(np.random.default_rng(1).normal(size=(4, 3)))
        self._check(lambda p: (matmul(p, w) * matmul(p, w)).sum(), (5, 4))

    def test_softmax(self):
        self._check(lambda p: (softmax(p, axis=-1)
                               * Tensor(np.arange(6.0).reshape(2, 3))).sum(),
                    (2, 3))

    def test_tanh_mul_div(self):
        self._check(lambda p: (p.tanh() * p / (p * p + 2.0)).sum(), (3, 3))

    def test_sum_mean_reshape_transpose(self):
        self._check(lambda p: (p.transpose_last().reshape(12).mean()
                               + p.sum(axis=0).sum()), (3, 4))

    def test_concat_take(self):
        def loss(p):
            c = concat([p, p * 2.0], axis=-1)
            return (c.take(np.array([1, 0, 1])) * c.take(np.array([0, 2, 2]))).sum()
        self._check(loss, (3, 2))

    def test_cosine(self):
        y = Tensor(np.random.default_rng(2).normal(size=4))
        self._check(lambda p: cosine_similarity(p, y), (4,))

    def test_signed_sqrt_away_from_zero(self):
        self._check(lambda p: signed_sqrt(p * p + 1.0).sum(), (3, 2))

    def test_pool_rows(self):
        self._check(lambda p: (pool_rows(p) * pool_rows(p)).sum(), (5, 3))


def test_backward_requires_scalar():
    with pytest.raises(DomainError):
        parameter(np.zeros((2, 2))).backward()


def test_backward_visits_shared_nodes_once():
    # a diamond-shaped graph: gradient of p through two paths sums exactly once
    p = parameter([2.0])
    shared = p * 3.0
    loss = (shared + shared).sum()
    loss.backward()
    assert p.grad[0] == pytest.approx(6.0)
