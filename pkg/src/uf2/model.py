"""End-to-end forward pass."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ModelConfig
from .embed import TokenGrid, patch_embed
from .errors import ShapeError
from .fusion import combine, fuse_tokens, run_stages
from .local_block import LN_EPS, local_uniblock_forward
from .tensor import Tensor, layer_norm, linear
from .weights import ModelWeights


@dataclass
class ForwardTrace:
    logits: Tensor
    video_token: Tensor | None  # F, None without global blocks
    class_token: Tensor  # F^C
    fused: Tensor  # Z
    stage_tokens: list[Tensor] = field(default_factory=list)
    layer_outputs: list[TokenGrid] = field(default_factory=list)


def expected_video_shape(cfg: ModelConfig) -> tuple[int, int, int, int]:
    return (3, cfg.frames, cfg.resolution, cfg.resolution)


def forward_trace(video: Tensor, cfg: ModelConfig, weights: ModelWeights, keep_layers: bool = False) -> ForwardTrace:
    video = np.asarray(video, dtype=np.dtype(cfg.dtype))
    if video.shape != expected_video_shape(cfg):
        raise ShapeError(f"video shape {video.shape} != expected {expected_video_shape(cfg)}")
    x = patch_embed(video, weights.embed(), cfg)
    layers = []
    stage_inputs = []
    for i in range(1, cfg.depth + 1):
        x = local_uniblock_forward(x, weights.local(i), cfg.heads)
        if keep_layers:
            layers.append(x)
        if i in cfg.global_layers:
            stage_inputs.append((weights.global_block(i), x))

    cls = layer_norm(x.class_tokens, weights["norm.gamma"], weights["norm.beta"], LN_EPS)
    f_c = cls.mean(axis=0)
    if stage_inputs:
        fw = weights.fusion()
        tokens = run_stages(stage_inputs, fw.strategy, cfg.heads, cfg.use_dpe)
        f = fuse_tokens(tokens, fw)
        z = combine(f, f_c, fw.alpha_raw)
    else:
        tokens, f, z = [], None, f_c
    logits = linear(z, weights["head.w"], weights["head.b"])
    return ForwardTrace(logits, f, f_c, z, tokens, layers)


def forward(video: Tensor, cfg: ModelConfig, weights: ModelWeights) -> Tensor:
    """Class logits for one clip."""
    return forward_trace(video, cfg, weights).logits
