"""Video-transformer building blocks: local/global UniBlocks, multi-stage fusion,
analytic cost accounting, gradient checks and the Kinetics-710 label merge."""

from .config import PRESETS, ModelConfig
from .cost import CostReport, count_flops, count_params
from .embed import TokenGrid, patch_embed
from .errors import ConfigError, DataError, NumericError, ShapeError, UF2Error
from .model import forward, forward_trace
from .weights import ModelWeights

__all__ = [
    "PRESETS",
    "ModelConfig",
    "CostReport",
    "count_flops",
    "count_params",
    "TokenGrid",
    "patch_embed",
    "ConfigError",
    "DataError",
    "NumericError",
    "ShapeError",
    "UF2Error",
    "forward",
    "forward_trace",
    "ModelWeights",
]
