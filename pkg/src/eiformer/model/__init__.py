from .config import ARCHS, ModelConfig
from .forecaster import ForecastModel, init_model, model_forward
from .layers import (
    LAYER_NORM_EPS,
    block_forward,
    embed_entities,
    feature_mlp_mix,
    full_variate_attention,
    latent_attention,
    project_head,
    random_projection_attention,
    temporal_mlp,
)
