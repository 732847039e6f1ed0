"""Forecaster assembly: parameter construction and the full forward pass.

Weight matrices use Xavier-uniform initialization, biases start at zero,
layer-norm affines at (1, 0). Frozen key matrices are drawn once from a
zero-mean normal whose variance matches the 1/sqrt(D) logit scaling and are
excluded from training.
"""

import numpy as np

from ..compute import Parameter, Tensor, add, matmul, reshape, transpose
from ..errors import ShapeError
from .config import ModelConfig
from .layers import block_forward, embed_entities, project_head


def _xavier(rng, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class ForecastModel:
    """A forecaster with named parameters, built deterministically from its config.

    forward maps histories [B, T, N, C] to forecasts [B, F, N, C] for any
    entity count N (except arch=featmlp, which is bound to a fixed N).
    """

    def __init__(self, config: ModelConfig):
        config.validate()
        self.config = config
        self.params: dict = {}
        self.blocks: list = []
        rng = np.random.default_rng(config.seed)
        t, f, c = config.history_len, config.forecast_len, config.channels
        d, m = config.embed_dim, config.latent_count
        hidden = config.hidden_mult * d

        if config.arch == "linear":
            self._add("head.weight", _xavier(rng, t * c, f * c, (t * c, f * c)))
            self._add("head.bias", np.zeros(f * c))
            return

        self._add("embedding.weight", _xavier(rng, t * c, d, (t * c, d)))
        self._add("embedding.bias", np.zeros(d))
        for i in range(config.num_blocks):
            block: dict = {}
            prefix = f"blocks.{i}."

            def p(name, array, trainable=True, block=block, prefix=prefix):
                param = self._add(prefix + name, array, trainable)
                block[name] = param

            if config.arch == "eiformer":
                p("norm_rp.gamma", np.ones(d))
                p("norm_rp.beta", np.zeros(d))
                p("rp.w", _xavier(rng, d, d, (d, d)))
                p("rp.k_frozen", rng.normal(0.0, d ** -0.25, size=(m, d)), trainable=False)
                p("rp.v", _xavier(rng, m, d, (m, d)))
                p("norm_att.gamma", np.ones(d))
                p("norm_att.beta", np.zeros(d))
                p("att.w", _xavier(rng, d, d, (d, d)))
                p("att.k", _xavier(rng, m, d, (m, d)))
                p("att.v", _xavier(rng, m, d, (m, d)))
            elif config.arch == "ivariate":
                p("norm_att.gamma", np.ones(d))
                p("norm_att.beta", np.zeros(d))
                p("att.wq", _xavier(rng, d, d, (d, d)))
                p("att.wk", _xavier(rng, d, d, (d, d)))
                p("att.wv", _xavier(rng, d, d, (d, d)))
            elif config.arch == "featmlp":
                n = config.featmlp_entities
                p("norm_mix.gamma", np.ones(d))
                p("norm_mix.beta", np.zeros(d))
                p("mix.w", _xavier(rng, n, n, (n, n)))
                p("mix.b", np.zeros((n, 1)))
            p("norm_mlp.gamma", np.ones(d))
            p("norm_mlp.beta", np.zeros(d))
            p("mlp.w1", _xavier(rng, d, hidden, (d, hidden)))
            p("mlp.b1", np.zeros(hidden))
            p("mlp.w2", _xavier(rng, hidden, d, (hidden, d)))
            p("mlp.b2", np.zeros(d))
            self.blocks.append(block)
        self._add("head.weight", _xavier(rng, d, f * c, (d, f * c)))
        self._add("head.bias", np.zeros(f * c))

    def _add(self, name: str, array: np.ndarray, trainable: bool = True) -> Parameter:
        param = Parameter(name, np.asarray(array, dtype=np.float64), trainable=trainable)
        self.params[name] = param
        return param

    def parameters(self) -> list:
        return list(self.params.values())

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def trainable_parameter_count(self) -> int:
        return sum(p.data.size for p in self.params.values() if p.trainable)

    def _validate_input(self, x: np.ndarray):
        cfg = self.config
        if x.ndim != 4:
            raise ShapeError(f"input must be [B, T, N, C], got shape {x.shape}")
        if x.shape[1] != cfg.history_len or x.shape[3] != cfg.channels:
            raise ShapeError(
                f"input shape {x.shape} does not match history_len={cfg.history_len}, "
                f"channels={cfg.channels}")
        if not np.all(np.isfinite(x)):
            raise ShapeError("input contains non-finite values")

    def forward(self, x) -> Tensor:
        out, _ = self._forward(x, capture=False)
        return out

    def forward_with_captures(self, x):
        """forward plus the post-embedding and post-block activations,
        each as a raw [B, N, D] array."""
        return self._forward(x, capture=True)

    def _forward(self, x, capture: bool):
        if isinstance(x, Tensor):
            arr = x.data
        else:
            arr = np.asarray(x, dtype=np.float64)
            x = Tensor(arr)
        self._validate_input(arr)
        cfg = self.config
        captures = []
        if cfg.arch == "linear":
            b, t, n, c = arr.shape
            flat = reshape(transpose(x, (0, 2, 1, 3)), (b, n, t * c))
            out = add(matmul(flat, self.params["head.weight"].tensor),
                      self.params["head.bias"].tensor)
            out = reshape(out, (b, n, cfg.forecast_len, c))
            return transpose(out, (0, 2, 1, 3)), captures

        h = embed_entities(x, self.params["embedding.weight"].tensor,
                           self.params["embedding.bias"].tensor)
        if capture:
            captures.append(("embedding", h.data))
        for i, block in enumerate(self.blocks):
            h = block_forward(h, block, cfg.arch)
            if capture:
                captures.append((f"block_{i}", h.data))
        out = project_head(h, self.params["head.weight"].tensor,
                           self.params["head.bias"].tensor,
                           cfg.forecast_len, cfg.channels)
        return out, captures


def init_model(config: ModelConfig) -> ForecastModel:
    return ForecastModel(config)


def model_forward(model: ForecastModel, x) -> Tensor:
    return model.forward(x)
