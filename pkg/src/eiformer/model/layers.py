"""Differentiable building blocks for the forecaster variants.

All layer inputs named h are [B, N, D] tensors: one D-dimensional token per
entity. Attention here is single-head with no output projection; logits are
scaled by 1/sqrt(D).
"""

import numpy as np

from ..compute import (
    Tensor,
    add,
    attention_map,
    gelu,
    layer_norm,
    matmul,
    reshape,
    scale,
    transpose,
)
from ..errors import InductivenessError, ShapeError

LAYER_NORM_EPS = 1e-5


def embed_entities(x, weight, bias):
    """Flatten each entity's [T, C] history and map it linearly to D dims.

    x: [B, T, N, C] -> [B, N, D]. Entities are embedded independently, which
    is what makes every downstream shape independent of entity identity.
    """
    b, t, n, c = x.shape
    per_entity = transpose(x, (0, 2, 1, 3))
    flat = reshape(per_entity, (b, n, t * c))
    return add(matmul(flat, weight), bias)


def latent_attention(h, w, k, v):
    """Attend from every entity token to a fixed set of learned latents.

    h: [B, N, D]; w: [D, D]; k, v: [M, D]. The attention map is [B, N, M],
    so time and memory stay linear in N for fixed M.
    """
    d = h.shape[-1]
    q = matmul(h, w)
    logits = scale(matmul(q, transpose(k, (1, 0))), 1.0 / np.sqrt(d))
    attn = attention_map(logits)
    return matmul(attn, v)


def random_projection_attention(h, w, k_frozen, v):
    """Same computation as latent_attention; the key matrix is a frozen
    random draw, so this sub-layer mixes through a fixed projection that
    training never moves."""
    return latent_attention(h, w, k_frozen, v)


def full_variate_attention(h, wq, wk, wv):
    """Standard pairwise self-attention across entities: [B, N, N] map."""
    d = h.shape[-1]
    q = matmul(h, wq)
    k = matmul(h, wk)
    v = matmul(h, wv)
    logits = scale(matmul(q, transpose(k, (0, 2, 1))), 1.0 / np.sqrt(d))
    attn = attention_map(logits)
    return matmul(attn, v)


def temporal_mlp(h, w1, b1, w2, b2):
    """Two-layer position-wise feed-forward with GELU: D -> hidden -> D."""
    return add(matmul(gelu(add(matmul(h, w1), b1)), w2), b2)


def feature_mlp_mix(h, w_mix, b_mix, expected_n: int):
    """Linear mixing across the entity axis followed by GELU.

    w_mix is [N, N]: output token i is a fixed weighted combination of all
    input tokens. The mixing weights are bound to entity positions, so the
    input entity count must equal the count the layer was built for.
    """
    n = h.shape[1]
    if n != expected_n:
        raise InductivenessError(
            f"feature MLP was built for {expected_n} entities but got {n}; "
            "this architecture cannot change entity count after training")
    mixed = add(matmul(w_mix, h), b_mix)
    return gelu(mixed)


def _norm(h, block, name):
    return layer_norm(h, block[f"{name}.gamma"].tensor, block[f"{name}.beta"].tensor,
                      eps=LAYER_NORM_EPS)


def block_forward(h, block: dict, arch: str):
    """Pre-norm residual block.

    eiformer: h1 = h  + RP_Att(LN(h))
              h2 = h1 + Latent_Att(LN(h1))
              h3 = h2 + MLP(LN(h2))
    ivariate: RP sub-layer omitted, latent attention replaced by full N x N
              attention.
    featmlp:  attention replaced by the fixed entity-mixing MLP.
    """
    if arch == "eiformer":
        h1 = add(h, random_projection_attention(
            _norm(h, block, "norm_rp"), block["rp.w"].tensor,
            block["rp.k_frozen"].tensor, block["rp.v"].tensor))
        h2 = add(h1, latent_attention(
            _norm(h1, block, "norm_att"), block["att.w"].tensor,
            block["att.k"].tensor, block["att.v"].tensor))
    elif arch == "ivariate":
        h2 = add(h, full_variate_attention(
            _norm(h, block, "norm_att"), block["att.wq"].tensor,
            block["att.wk"].tensor, block["att.wv"].tensor))
    elif arch == "featmlp":
        expected_n = block["mix.w"].tensor.shape[0]
        h2 = add(h, feature_mlp_mix(
            _norm(h, block, "norm_mix"), block["mix.w"].tensor,
            block["mix.b"].tensor, expected_n))
    else:
        raise ShapeError(f"arch {arch!r} has no block definition")
    return add(h2, temporal_mlp(
        _norm(h2, block, "norm_mlp"), block["mlp.w1"].tensor, block["mlp.b1"].tensor,
        block["mlp.w2"].tensor, block["mlp.b2"].tensor))


def project_head(h, weight, bias, forecast_len: int, channels: int):
    """Map entity tokens to forecasts: [B, N, D] -> [B, F, N, C]."""
    b, n, _ = h.shape
    out = add(matmul(h, weight), bias)
    out = reshape(out, (b, n, forecast_len, channels))
    return transpose(out, (0, 2, 1, 3))
