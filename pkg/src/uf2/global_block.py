"""Global UniBlock: positional conv, query cross-attention and FFN.

The cross-attention pool is the set of patch tokens of the whole clip; class
tokens never enter it and DPE passes them through unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embed import TokenGrid
from .local_block import LN_EPS, FFNWeights, _check_heads, ffn, merge_heads, split_heads
from .tensor import Tensor, depthwise_conv3d, layer_norm, linear, softmax_lastdim


@dataclass
class GlobalBlockWeights:
    dpe_kernel: Tensor  # 3 x 3 x 3 x C
    dpe_bias: Tensor  # C
    query: Tensor  # nq x C, zero at init
    ln_q_gamma: Tensor
    ln_q_beta: Tensor
    ln_x_gamma: Tensor
    ln_x_beta: Tensor
    wq: Tensor
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    wo: Tensor  # zero at init
    bo: Tensor  # zero at init
    ffn: FFNWeights  # w2/b2 zero at init


def dpe(x: TokenGrid, w: GlobalBlockWeights) -> TokenGrid:
    """``x + DWConv3d(x)`` on patch tokens."""
    p = x.patch_tokens
    return TokenGrid(p + depthwise_conv3d(p, w.dpe_kernel) + w.dpe_bias, x.class_tokens)


def _context(x: TokenGrid | Tensor, extra: Tensor | None) -> Tensor:
    ctx = x.flat_patches() if isinstance(x, TokenGrid) else np.asarray(x)
    if extra is not None:
        ctx = np.concatenate([np.atleast_2d(extra), ctx], axis=0)
    return ctx


def cross_mhra(
    q: Tensor,
    x: TokenGrid | Tensor,
    w: GlobalBlockWeights,
    heads: int,
    extra_context: Tensor | None = None,
) -> Tensor:
    """Queries ``q`` (nq x C) attend over all patch tokens of ``x``.

    ``extra_context`` rows are prepended to the key/value pool. There is no
    residual onto ``q``.
    """
    q = np.atleast_2d(q)
    ctx = _context(x, extra_context)
    C = ctx.shape[-1]
    _check_heads(C, heads)
    d = C // heads
    qn = layer_norm(q, w.ln_q_gamma, w.ln_q_beta, LN_EPS)
    xn = layer_norm(ctx, w.ln_x_gamma, w.ln_x_beta, LN_EPS)
    qh = split_heads(linear(qn, w.wq, w.bq), heads)  # N x nq x d
    kh = split_heads(linear(xn, w.wk, w.bk), heads)  # N x L x d
    vh = split_heads(linear(xn, w.wv, w.bv), heads)
    a = softmax_lastdim(qh @ np.swapaxes(kh, -1, -2) / np.sqrt(d))  # N x nq x L
    return linear(merge_heads(a @ vh), w.wo, w.bo)


def global_uniblock_forward(
    q: Tensor,
    x: TokenGrid,
    w: GlobalBlockWeights,
    heads: int,
    use_dpe: bool = True,
    extra_context: Tensor | None = None,
) -> Tensor:
    """Return the ``nq x C`` video tokens of one global block."""
    xc = dpe(x, w) if use_dpe else x
    xst = cross_mhra(q, xc, w, heads, extra_context)
    return ffn(xst, w.ffn)
