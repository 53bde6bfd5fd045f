"""Multi-stage fusion of global-block video tokens and the final gated combination."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit

from .config import FUSION_STRATEGIES
from .embed import TokenGrid
from .errors import ConfigError, ShapeError
from .global_block import GlobalBlockWeights, global_uniblock_forward
from .tensor import Tensor


@dataclass
class FusionWeights:
    strategy: str
    alpha_raw: float = 0.0
    proj: Tensor | None = None  # (N_stages * C) x C, parallel strategy only


sigmoid = expit


def run_stages(
    stages: Sequence[tuple[GlobalBlockWeights, TokenGrid]],
    strategy: str,
    heads: int,
    use_dpe: bool = True,
    queries: Sequence[Tensor] | None = None,
) -> list[Tensor]:
    """Evaluate every global block and return its video token (length-C vector).

    ``queries`` default to each block's learned query. A block with several
    query rows yields the mean of its output rows.
    """
    if strategy not in FUSION_STRATEGIES:
        raise ConfigError(f"unknown fusion strategy {strategy!r}")
    if not stages:
        raise ConfigError("fusion needs at least one stage")
    if queries is None:
        queries = [w.query for w, _ in stages]
    if len(queries) != len(stages):
        raise ShapeError(f"{len(queries)} queries for {len(stages)} stages")

    tokens: list[Tensor] = []
    for i, ((w, x), q) in enumerate(zip(stages, queries)):
        q = np.atleast_2d(q)
        extra = None
        prev = tokens[-1][None, :] if i > 0 else None
        if prev is not None:
            if strategy == "sequential":
                q = prev
            elif strategy == "hierarchical_kv":
                extra = prev
            elif strategy == "hierarchical_q":
                q = np.concatenate([prev, q], axis=0)
        out = global_uniblock_forward(q, x, w, heads, use_dpe, extra)
        tokens.append(out.mean(axis=0))
    return tokens


def fuse_tokens(tokens: Sequence[Tensor], w: FusionWeights) -> Tensor:
    """Collapse per-stage video tokens into the final video token F."""
    if w.strategy == "parallel":
        if w.proj is None:
            raise ConfigError("parallel fusion needs a projection matrix")
        return np.concatenate(list(tokens)) @ w.proj
    return tokens[-1]


def fuse(
    stages: Sequence[tuple[GlobalBlockWeights, TokenGrid]],
    w: FusionWeights,
    heads: int,
    use_dpe: bool = True,
    queries: Sequence[Tensor] | None = None,
) -> Tensor:
    tokens = run_stages(stages, w.strategy, heads, use_dpe, queries)
    return fuse_tokens(tokens, w)


def combine(F: Tensor, F_c: Tensor, alpha_raw: float) -> Tensor:
    """``sigmoid(a) * F + (1 - sigmoid(a)) * F_c``."""
    alpha = sigmoid(float(np.asarray(alpha_raw).reshape(-1)[0]))
    return alpha * np.asarray(F) + (1.0 - alpha) * np.asarray(F_c)
