"""Local UniBlock: temporal relation aggregation in front of a ViT block.

Class tokens are treated as an extra spatial site: they form their own
temporal tube in LT_MHRA and attend together with their frame in GS_MHRA.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embed import TokenGrid
from .errors import ConfigError
from .tensor import (
    Tensor,
    batch_norm_infer,
    depthwise_conv_temporal,
    gelu,
    layer_norm,
    linear,
    softmax_lastdim,
)

LN_EPS = 1e-5
BN_EPS = 1e-5


@dataclass
class LTMHRAWeights:
    bn_mean: Tensor  # C
    bn_var: Tensor  # C
    bn_gamma: Tensor  # C
    bn_beta: Tensor  # C
    down_w: Tensor  # C x Ci
    down_b: Tensor  # Ci
    kernel: Tensor  # t x Ci
    up_w: Tensor  # Ci x C, zero at init
    up_b: Tensor  # C, zero at init


@dataclass
class AttentionWeights:
    ln_gamma: Tensor
    ln_beta: Tensor
    wq: Tensor
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    wo: Tensor
    bo: Tensor


@dataclass
class FFNWeights:
    ln_gamma: Tensor
    ln_beta: Tensor
    w1: Tensor  # C x 4C
    b1: Tensor
    w2: Tensor  # 4C x C
    b2: Tensor


@dataclass
class LocalBlockWeights:
    attn: AttentionWeights
    ffn: FFNWeights
    lt: list[LTMHRAWeights] = field(default_factory=list)


def lt_mhra_tokens(x: Tensor, w: LTMHRAWeights) -> Tensor:
    """LT_MHRA on a ``T x S x C`` array, residual included."""
    h = batch_norm_infer(x, w.bn_mean, w.bn_var, w.bn_gamma, w.bn_beta, BN_EPS)
    h = linear(h, w.down_w, w.down_b)
    h = depthwise_conv_temporal(h, w.kernel)
    return x + linear(h, w.up_w, w.up_b)


def lt_mhra(x: TokenGrid, w: LTMHRAWeights) -> TokenGrid:
    return TokenGrid.from_frames(lt_mhra_tokens(x.frames(), w), x.grid)


def split_heads(x: Tensor, heads: int) -> Tensor:
    """``... x n x C`` -> ``... x heads x n x C/heads``."""
    *lead, n, c = x.shape
    return np.moveaxis(x.reshape(*lead, n, heads, c // heads), -2, -3)


def merge_heads(x: Tensor) -> Tensor:
    *lead, h, n, d = x.shape
    return np.moveaxis(x, -3, -2).reshape(*lead, n, h * d)


def _check_heads(width: int, heads: int) -> None:
    if heads < 1 or width % heads:
        raise ConfigError(f"width {width} not divisible by {heads} heads")


def self_attention(x: Tensor, w: AttentionWeights, heads: int) -> Tensor:
    """Multi-head self-attention over axis -2 of a ``... x n x C`` array (no norm, no residual)."""
    _check_heads(x.shape[-1], heads)
    d = x.shape[-1] // heads
    q = split_heads(linear(x, w.wq, w.bq), heads)
    k = split_heads(linear(x, w.wk, w.bk), heads)
    v = split_heads(linear(x, w.wv, w.bv), heads)
    a = softmax_lastdim(q @ np.swapaxes(k, -1, -2) / np.sqrt(d))
    return linear(merge_heads(a @ v), w.wo, w.bo)


def gs_mhra_tokens(x: Tensor, w: AttentionWeights, heads: int) -> Tensor:
    """Per-frame attention on a ``T x S x C`` array, pre-LN and residual included."""
    return x + self_attention(layer_norm(x, w.ln_gamma, w.ln_beta, LN_EPS), w, heads)


def gs_mhra(x: TokenGrid, w: AttentionWeights, heads: int) -> TokenGrid:
    return TokenGrid.from_frames(gs_mhra_tokens(x.frames(), w, heads), x.grid)


def ffn(x: Tensor, w: FFNWeights) -> Tensor:
    """Pre-LN feed-forward with residual: ``x + W2 gelu(W1 LN(x) + b1) + b2``."""
    h = gelu(linear(layer_norm(x, w.ln_gamma, w.ln_beta, LN_EPS), w.w1, w.b1))
    return x + linear(h, w.w2, w.b2)


def local_uniblock_forward(x: TokenGrid, w: LocalBlockWeights, heads: int) -> TokenGrid:
    """LT_MHRA -> GS_MHRA -> (LT_MHRA) -> FFN.

    With two LT_MHRA instances the second runs after the spatial attention.
    With none this is a plain ViT block.
    """
    count = len(w.lt)
    if count > 2:
        raise ConfigError(f"at most 2 LT_MHRA instances per block, got {count}")
    h = x.frames()
    if count >= 1:
        h = lt_mhra_tokens(h, w.lt[0])
    h = gs_mhra_tokens(h, w.attn, heads)
    if count == 2:
        h = lt_mhra_tokens(h, w.lt[1])
    h = ffn(h, w.ffn)
    return TokenGrid.from_frames(h, x.grid)
