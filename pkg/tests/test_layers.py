"""Layer-level tests against explicit per-entity loop transcriptions."""

import numpy as np
import numpy.testing as npt
import pytest
from scipy.special import erf

from eiformer.compute import Parameter, Tape, Tensor, backward, mean_all, mul, sum_all
from eiformer.errors import InductivenessError
from eiformer.model import (
    block_forward,
    embed_entities,
    feature_mlp_mix,
    full_variate_attention,
    latent_attention,
    random_projection_attention,
    temporal_mlp,
)
from eiformer.model.layers import LAYER_NORM_EPS


def gelu_scalar(x: float) -> float:
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def softmax_1d(v: np.ndarray) -> np.ndarray:
    e = np.exp(v - v.max())
    return e / e.sum()


def layer_norm_1d(row: np.ndarray, gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    mu = row.mean()
    var = ((row - mu) ** 2).mean()
    return (row - mu) / np.sqrt(var + LAYER_NORM_EPS) * gamma + beta


def latent_attention_oracle(h, w, k, v):
    """Per-entity, per-latent loop transcription of the attention formula."""
    b_sz, n, d = h.shape
    m = k.shape[0]
    out = np.zeros_like(h)
    for b in range(b_sz):
        for i in range(n):
            q = h[b, i] @ w
            logits = np.array([q @ k[j] / np.sqrt(d) for j in range(m)])
            a = softmax_1d(logits)
            out[b, i] = sum(a[j] * v[j] for j in range(m))
    return out


def full_attention_oracle(h, wq, wk, wv):
    b_sz, n, d = h.shape
    out = np.zeros_like(h)
    for b in range(b_sz):
        q = h[b] @ wq
        k = h[b] @ wk
        v = h[b] @ wv
        for i in range(n):
            logits = np.array([q[i] @ k[j] / np.sqrt(d) for j in range(n)])
            a = softmax_1d(logits)
            out[b, i] = sum(a[j] * v[j] for j in range(n))
    return out


def temporal_mlp_oracle(h, w1, b1, w2, b2):
    b_sz, n, _ = h.shape
    out = np.zeros_like(h)
    for b in range(b_sz):
        for i in range(n):
            hidden = h[b, i] @ w1 + b1
            hidden = np.array([gelu_scalar(x) for x in hidden])
            out[b, i] = hidden @ w2 + b2
    return out


def _rand_weights(rng, d, m, hidden):
    return {
        "w": rng.normal(size=(d, d)) * 0.3,
        "k": rng.normal(size=(m, d)) * 0.3,
        "v": rng.normal(size=(m, d)) * 0.3,
        "w1": rng.normal(size=(d, hidden)) * 0.3,
        "b1": rng.normal(size=hidden) * 0.1,
        "w2": rng.normal(size=(hidden, d)) * 0.3,
        "b2": rng.normal(size=d) * 0.1,
    }


class TestLatentAttention:
    def test_single_latent_collapses_to_v_row(self):
        rng = np.random.default_rng(0)
        h = rng.normal(size=(2, 4, 6))
        w = rng.normal(size=(6, 6))
        k = rng.normal(size=(1, 6))
        v = rng.normal(size=(1, 6))
        out = latent_attention(Tensor(h), Tensor(w), Tensor(k), Tensor(v))
        expected = np.broadcast_to(v[0], (2, 4, 6))
        npt.assert_allclose(out.data, expected, atol=1e-12, rtol=0)

    def test_against_loop_oracle(self):
        rng = np.random.default_rng(1)
        h = rng.normal(size=(2, 5, 8))
        w = rng.normal(size=(8, 8))
        k = rng.normal(size=(3, 8))
        v = rng.normal(size=(3, 8))
        out = latent_attention(Tensor(h), Tensor(w), Tensor(k), Tensor(v))
        npt.assert_allclose(out.data, latent_attention_oracle(h, w, k, v),
                            atol=1e-10, rtol=0)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(2)
        h = rng.normal(size=(1, 7, 8))
        w, k, v = rng.normal(size=(8, 8)), rng.normal(size=(4, 8)), rng.normal(size=(4, 8))
        perm = rng.permutation(7)
        out = latent_attention(Tensor(h), Tensor(w), Tensor(k), Tensor(v)).data
        out_perm = latent_attention(Tensor(h[:, perm]), Tensor(w), Tensor(k), Tensor(v)).data
        npt.assert_allclose(out_perm, out[:, perm], atol=1e-12, rtol=0)


class TestRandomProjection:
    def test_identical_math_to_latent_attention(self):
        rng = np.random.default_rng(3)
        h = rng.normal(size=(1, 4, 6))
        w, k, v = rng.normal(size=(6, 6)), rng.normal(size=(2, 6)), rng.normal(size=(2, 6))
        a = latent_attention(Tensor(h), Tensor(w), Tensor(k), Tensor(v)).data
        b = random_projection_attention(Tensor(h), Tensor(w), Tensor(k), Tensor(v)).data
        npt.assert_array_equal(a, b)

    def test_frozen_key_gradient_exactly_zero(self):
        rng = np.random.default_rng(4)
        h = Tensor(rng.normal(size=(1, 4, 6)), requires_grad=True)
        w = Parameter("w", rng.normal(size=(6, 6)))
        k = Parameter("k_frozen", rng.normal(size=(2, 6)), trainable=False)
        v = Parameter("v", rng.normal(size=(2, 6)))
        with Tape() as tape:
            out = random_projection_attention(h, w.tensor, k.tensor, v.tensor)
            backward(mean_all(mul(out, out)), tape)
        npt.assert_array_equal(k.tensor.grad, np.zeros((2, 6)))
        assert np.any(w.tensor.grad != 0)
        assert np.any(v.tensor.grad != 0)


class TestFullVariateAttention:
    def test_single_entity_attends_to_itself(self):
        rng = np.random.default_rng(5)
        h = rng.normal(size=(1, 1, 6))
        wq, wk, wv = (rng.normal(size=(6, 6)) for _ in range(3))
        out = full_variate_attention(Tensor(h), Tensor(wq), Tensor(wk), Tensor(wv))
        npt.assert_allclose(out.data, h @ wv, atol=1e-12, rtol=0)

    def test_against_loop_oracle(self):
        rng = np.random.default_rng(6)
        h = rng.normal(size=(2, 3, 8))
        wq, wk, wv = (rng.normal(size=(8, 8)) for _ in range(3))
        out = full_variate_attention(Tensor(h), Tensor(wq), Tensor(wk), Tensor(wv))
        npt.assert_allclose(out.data, full_attention_oracle(h, wq, wk, wv),
                            atol=1e-10, rtol=0)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(7)
        h = rng.normal(size=(1, 6, 8))
        wq, wk, wv = (rng.normal(size=(8, 8)) for _ in range(3))
        perm = rng.permutation(6)
        out = full_variate_attention(Tensor(h), Tensor(wq), Tensor(wk), Tensor(wv)).data
        out_perm = full_variate_attention(
            Tensor(h[:, perm]), Tensor(wq), Tensor(wk), Tensor(wv)).data
        npt.assert_allclose(out_perm, out[:, perm], atol=1e-12, rtol=0)


class TestTemporalMlp:
    def test_zero_weights_map_to_zero(self):
        h = Tensor(np.random.default_rng(8).normal(size=(1, 3, 4)))
        z = lambda *s: Tensor(np.zeros(s))
        out = temporal_mlp(h, z(4, 8), z(8), z(8, 4), z(4))
        npt.assert_array_equal(out.data, np.zeros((1, 3, 4)))

    def test_identical_tokens_identical_outputs(self):
        rng = np.random.default_rng(9)
        token = rng.normal(size=4)
        h = np.tile(token, (1, 5, 1))
        w = _rand_weights(rng, 4, 2, 8)
        out = temporal_mlp(Tensor(h), Tensor(w["w1"]), Tensor(w["b1"]),
                           Tensor(w["w2"]), Tensor(w["b2"])).data
        for i in range(1, 5):
            npt.assert_array_equal(out[0, i], out[0, 0])

    def test_against_loop_oracle(self):
        rng = np.random.default_rng(10)
        h = rng.normal(size=(2, 3, 4))
        w = _rand_weights(rng, 4, 2, 8)
        out = temporal_mlp(Tensor(h), Tensor(w["w1"]), Tensor(w["b1"]),
                           Tensor(w["w2"]), Tensor(w["b2"])).data
        npt.assert_allclose(out, temporal_mlp_oracle(h, w["w1"], w["b1"], w["w2"], w["b2"]),
                            atol=1e-10, rtol=0)


class TestFeatureMlpMix:
    def test_identity_mixing_is_gelu(self):
        rng = np.random.default_rng(11)
        h = rng.normal(size=(2, 4, 3))
        out = feature_mlp_mix(Tensor(h), Tensor(np.eye(4)), Tensor(np.zeros((4, 1))), 4)
        expected = np.vectorize(gelu_scalar)(h)
        npt.assert_allclose(out.data, expected, atol=1e-12, rtol=0)

    def test_wrong_entity_count_raises(self):
        h = Tensor(np.zeros((1, 5, 3)))
        with pytest.raises(InductivenessError) as err:
            feature_mlp_mix(h, Tensor(np.eye(4)), Tensor(np.zeros((4, 1))), 4)
        assert "4" in str(err.value) and "5" in str(err.value)

    def test_against_loop_oracle(self):
        rng = np.random.default_rng(12)
        h = rng.normal(size=(1, 3, 4))
        w = rng.normal(size=(3, 3))
        b = rng.normal(size=(3, 1))
        out = feature_mlp_mix(Tensor(h), Tensor(w), Tensor(b), 3).data
        expected = np.zeros_like(h)
        for i in range(3):
            for dch in range(4):
                acc = sum(w[i, j] * h[0, j, dch] for j in range(3))
                expected[0, i, dch] = gelu_scalar(acc + b[i, 0])
        npt.assert_allclose(out, expected, atol=1e-10, rtol=0)


def _zero_block(arch: str, d: int, m: int, hidden: int, n: int = 4) -> dict:
    """Every sub-layer weight zero, layer-norm affines included."""
    z = lambda *s: Parameter("z", np.zeros(s))
    block = {
        "norm_mlp.gamma": z(d), "norm_mlp.beta": z(d),
        "mlp.w1": z(d, hidden), "mlp.b1": z(hidden),
        "mlp.w2": z(hidden, d), "mlp.b2": z(d),
    }
    if arch == "eiformer":
        block.update({
            "norm_rp.gamma": z(d), "norm_rp.beta": z(d),
            "rp.w": z(d, d), "rp.k_frozen": z(m, d), "rp.v": z(m, d),
            "norm_att.gamma": z(d), "norm_att.beta": z(d),
            "att.w": z(d, d), "att.k": z(m, d), "att.v": z(m, d),
        })
    elif arch == "ivariate":
        block.update({
            "norm_att.gamma": z(d), "norm_att.beta": z(d),
            "att.wq": z(d, d), "att.wk": z(d, d), "att.wv": z(d, d),
        })
    elif arch == "featmlp":
        block.update({
            "norm_mix.gamma": z(d), "norm_mix.beta": z(d),
            "mix.w": z(n, n), "mix.b": z(n, 1),
        })
    return block


class TestBlockForward:
    @pytest.mark.parametrize("arch", ["eiformer", "ivariate", "featmlp"])
    def test_all_zero_weights_is_exact_identity(self, arch):
        rng = np.random.default_rng(13)
        h = rng.normal(size=(2, 4, 6))
        block = _zero_block(arch, d=6, m=3, hidden=12, n=4)
        out = block_forward(Tensor(h), block, arch)
        assert out.data.tobytes() == h.tobytes()

    @pytest.mark.parametrize("n", [1, 7, 129])
    def test_output_shape_tracks_input(self, n):
        rng = np.random.default_rng(14)
        h = rng.normal(size=(1, n, 6))
        block = _zero_block("eiformer", d=6, m=3, hidden=12)
        out = block_forward(Tensor(h), block, "eiformer")
        assert out.shape == (1, n, 6)

    def test_eiformer_block_against_transcription(self):
        # independent composition: three pre-norm residual sub-layers
        rng = np.random.default_rng(15)
        d, m, hidden = 6, 3, 12
        h = rng.normal(size=(1, 3, d))
        w = {
            "norm_rp.gamma": rng.normal(size=d), "norm_rp.beta": rng.normal(size=d) * 0.1,
            "rp.w": rng.normal(size=(d, d)) * 0.3,
            "rp.k_frozen": rng.normal(size=(m, d)) * 0.3,
            "rp.v": rng.normal(size=(m, d)) * 0.3,
            "norm_att.gamma": rng.normal(size=d), "norm_att.beta": rng.normal(size=d) * 0.1,
            "att.w": rng.normal(size=(d, d)) * 0.3,
            "att.k": rng.normal(size=(m, d)) * 0.3,
            "att.v": rng.normal(size=(m, d)) * 0.3,
            "norm_mlp.gamma": rng.normal(size=d), "norm_mlp.beta": rng.normal(size=d) * 0.1,
            "mlp.w1": rng.normal(size=(d, hidden)) * 0.3, "mlp.b1": rng.normal(size=hidden) * 0.1,
            "mlp.w2": rng.normal(size=(hidden, d)) * 0.3, "mlp.b2": rng.normal(size=d) * 0.1,
        }
        block = {name: Parameter(name, arr) for name, arr in w.items()}
        out = block_forward(Tensor(h), block, "eiformer").data

        def norm_rows(x, gamma, beta):
            y = np.zeros_like(x)
            for b in range(x.shape[0]):
                for i in range(x.shape[1]):
                    y[b, i] = layer_norm_1d(x[b, i], gamma, beta)
            return y

        h1 = h + latent_attention_oracle(
            norm_rows(h, w["norm_rp.gamma"], w["norm_rp.beta"]),
            w["rp.w"], w["rp.k_frozen"], w["rp.v"])
        h2 = h1 + latent_attention_oracle(
            norm_rows(h1, w["norm_att.gamma"], w["norm_att.beta"]),
            w["att.w"], w["att.k"], w["att.v"])
        h3 = h2 + temporal_mlp_oracle(
            norm_rows(h2, w["norm_mlp.gamma"], w["norm_mlp.beta"]),
            w["mlp.w1"], w["mlp.b1"], w["mlp.w2"], w["mlp.b2"])
        npt.assert_allclose(out, h3, atol=1e-9, rtol=0)


class TestEmbedding:
    def test_zero_weights_zero_output(self):
        x = np.random.default_rng(16).normal(size=(2, 5, 3, 2))
        out = embed_entities(Tensor(x), Tensor(np.zeros((10, 6))), Tensor(np.zeros(6)))
        npt.assert_array_equal(out.data, np.zeros((2, 3, 6)))

    def test_identical_histories_identical_rows(self):
        rng = np.random.default_rng(17)
        series = rng.normal(size=(4, 1))
        x = np.stack([series] * 3, axis=1)[None]  # [1, T=4, N=3, C=1]
        w, b = rng.normal(size=(4, 6)), rng.normal(size=6)
        out = embed_entities(Tensor(x), Tensor(w), Tensor(b)).data
        npt.assert_array_equal(out[0, 0], out[0, 1])
        npt.assert_array_equal(out[0, 0], out[0, 2])

    def test_entity_rows_independent_of_population(self):
        # embedding of entity 0 must not change when 49 more entities are appended
        rng = np.random.default_rng(18)
        x_small = rng.normal(size=(1, 4, 1, 2))
        extra = rng.normal(size=(1, 4, 49, 2))
        x_big = np.concatenate([x_small, extra], axis=2)
        w, b = rng.normal(size=(8, 5)), rng.normal(size=5)
        small = embed_entities(Tensor(x_small), Tensor(w), Tensor(b)).data
        big = embed_entities(Tensor(x_big), Tensor(w), Tensor(b)).data
        npt.assert_allclose(big[:, 0], small[:, 0], atol=1e-12, rtol=0)
