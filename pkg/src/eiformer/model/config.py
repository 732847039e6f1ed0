"""Model hyperparameter container and validation."""

from dataclasses import asdict, dataclass
from typing import Optional

from ..errors import ConfigError

ARCHS = ("eiformer", "ivariate", "linear", "featmlp")


@dataclass
class ModelConfig:
    """Hyperparameters shared by all forecaster variants.

    arch selects the variant:
      eiformer  -- latent attention with a frozen random-projection sub-layer
      ivariate  -- full pairwise entity attention (quadratic in N)
      linear    -- one linear layer from flattened history to flattened forecast
      featmlp   -- entity-mixing feature MLP bound to a fixed entity count
    """

    arch: str = "eiformer"
    history_len: int = 12
    forecast_len: int = 12
    channels: int = 1
    embed_dim: int = 64
    latent_count: int = 16
    num_blocks: int = 2
    hidden_mult: int = 2
    seed: int = 0
    featmlp_entities: Optional[int] = None

    def validate(self):
        if self.arch not in ARCHS:
            raise ConfigError(f"arch must be one of {ARCHS}, got {self.arch!r}")
        for field in ("history_len", "forecast_len", "channels", "embed_dim",
                      "latent_count", "num_blocks", "hidden_mult"):
            value = getattr(self, field)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{field} must be a positive integer, got {value!r}")
        if not isinstance(self.seed, int):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        if self.arch == "featmlp":
            if self.featmlp_entities is None or self.featmlp_entities < 1:
                raise ConfigError(
                    "featmlp_entities must be a positive integer for arch=featmlp, "
                    f"got {self.featmlp_entities!r}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config fields: {sorted(unknown)}")
        return cls(**d).validate()
