"""Forward-value tests for the tensor op layer against loop oracles."""

import numpy as np
import numpy.testing as npt
import pytest

from eiformer.compute import Tensor, layer_norm, matmul, softmax_rows
from eiformer.errors import NumericError, ShapeError


def matmul_oracle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Triple-loop reference product, no BLAS."""
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


def layer_norm_oracle(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
                      eps: float) -> np.ndarray:
    """Two-pass reference: explicit mean, explicit population variance."""
    out = np.zeros_like(x)
    rows = x.reshape(-1, x.shape[-1])
    flat = out.reshape(-1, x.shape[-1])
    for r in range(rows.shape[0]):
        row = rows[r]
        mu = sum(row) / len(row)
        var = sum((v - mu) ** 2 for v in row) / len(row)
        flat[r] = (row - mu) / np.sqrt(var + eps) * gamma + beta
    return out


class TestMatmul:
    def test_identity(self):
        a = np.arange(9.0).reshape(3, 3)
        out = matmul(Tensor(a), Tensor(np.eye(3)))
        npt.assert_array_equal(out.data, a)

    def test_hand_case(self):
        out = matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]]))
        npt.assert_array_equal(out.data, [[11.0]])

    def test_against_loop_oracle(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(4, 5))
        b = rng.normal(size=(5, 3))
        out = matmul(Tensor(a), Tensor(b))
        npt.assert_allclose(out.data, matmul_oracle(a, b), atol=1e-12, rtol=0)

    def test_batched_broadcast(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(2, 4, 5))
        b = rng.normal(size=(5, 3))
        out = matmul(Tensor(a), Tensor(b))
        for i in range(2):
            npt.assert_allclose(out.data[i], matmul_oracle(a[i], b), atol=1e-12, rtol=0)

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError) as err:
            matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))
        assert "(2, 3)" in str(err.value) and "(4, 2)" in str(err.value)

    def test_vector_operand_rejected(self):
        with pytest.raises(ShapeError):
            matmul(Tensor(np.zeros(3)), Tensor(np.zeros((3, 2))))


class TestSoftmaxRows:
    def test_uniform_on_equal_logits(self):
        out = softmax_rows(Tensor([0.0, 0.0]))
        npt.assert_allclose(out.data, [0.5, 0.5], atol=1e-15)

    def test_closed_form_quarter(self):
        # logits [0, ln 3] -> [1, 3] / 4
        out = softmax_rows(Tensor([0.0, np.log(3.0)]))
        npt.assert_allclose(out.data, [0.25, 0.75], atol=1e-12)

    def test_large_logits_no_overflow(self):
        out = softmax_rows(Tensor([1000.0, 1000.0, 1000.0]))
        npt.assert_allclose(out.data, [1 / 3] * 3, atol=1e-15)

    @pytest.mark.parametrize("seed", range(20))
    def test_rows_sum_to_one(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(scale=1e3, size=(5, 7))
        out = softmax_rows(Tensor(x))
        npt.assert_allclose(out.data.sum(axis=-1), np.ones(5), atol=1e-12, rtol=0)
        assert np.all(out.data >= 0.0)

    def test_nan_input_rejected(self):
        with pytest.raises(NumericError):
            softmax_rows(Tensor([1.0, np.nan]))


class TestLayerNorm:
    def test_mean_zero_var_one(self):
        gamma, beta = Tensor(np.ones(3)), Tensor(np.zeros(3))
        out = layer_norm(Tensor([1.0, 2.0, 3.0]), gamma, beta, eps=1e-12)
        assert abs(out.data.mean()) < 1e-12
        assert abs(out.data.var() - 1.0) < 1e-9

    def test_constant_row_maps_to_beta(self):
        gamma, beta = Tensor(np.ones(3)), Tensor(np.zeros(3))
        out = layer_norm(Tensor([5.0, 5.0, 5.0]), gamma, beta, eps=1e-5)
        npt.assert_array_equal(out.data, np.zeros(3))

    def test_against_two_pass_oracle(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(4, 6))
        gamma = rng.normal(size=6)
        beta = rng.normal(size=6)
        out = layer_norm(Tensor(x), Tensor(gamma), Tensor(beta), eps=1e-5)
        npt.assert_allclose(out.data, layer_norm_oracle(x, gamma, beta, 1e-5),
                            atol=1e-10, rtol=0)

    def test_affine_shape_mismatch(self):
        with pytest.raises(ShapeError):
            layer_norm(Tensor(np.zeros((2, 4))), Tensor(np.ones(3)), Tensor(np.zeros(3)))


def test_tensor_buffers_are_float64_row_major():
    t = Tensor([[1, 2], [3, 4]])
    assert t.data.dtype == np.float64
    assert t.data.flags["C_CONTIGUOUS"]
