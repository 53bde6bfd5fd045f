"""Closed-form parameter and FLOP counts.

FLOPs count one multiply-accumulate as 2. Softmax, normalisation, GeLU,
bias and residual additions are not counted.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

from .config import ModelConfig


@dataclass
class CostReport:
    params_total: int = 0
    flops_total: int = 0
    params_breakdown: dict[str, int] = field(default_factory=OrderedDict)
    flops_breakdown: dict[str, int] = field(default_factory=OrderedDict)
    views: int = 1

    def to_dict(self) -> dict:
        return {
            "params_total": self.params_total,
            "params_m": self.params_total / 1e6,
            "flops_total": self.flops_total,
            "tflops": self.flops_total / 1e12,
            "views": self.views,
            "params_breakdown": dict(self.params_breakdown),
            "flops_breakdown": dict(self.flops_breakdown),
        }


def linear_params(cin: int, cout: int, bias: bool = True) -> int:
    return cin * cout + (cout if bias else 0)


def linear_flops(tokens: int, cin: int, cout: int) -> int:
    return 2 * tokens * cin * cout


def _add(d: dict, key: str, value: int) -> None:
    d[key] = d.get(key, 0) + int(value)


def count_params(cfg: ModelConfig) -> CostReport:
    C, K = cfg.width, cfg.num_classes
    _, H, W = cfg.grid
    Ci, t = cfg.inner_width, cfg.tube
    rows: dict[str, int] = OrderedDict()

    _add(rows, "embed", C * 3 * 3 * cfg.patch_size**2 + C + C + (H * W + 1) * C)
    for i in range(1, cfg.depth + 1):
        for _ in range(cfg.local_count(i)):
            bn = 4 * C  # running mean/var + affine
            _add(rows, "lt_mhra", bn + linear_params(C, Ci) + t * Ci + linear_params(Ci, C))
        _add(rows, "gs_mhra", 2 * C + 4 * linear_params(C, C))
        _add(rows, "ffn", 2 * C + linear_params(C, 4 * C) + linear_params(4 * C, C))
    for _ in cfg.global_layers:
        # DPE weights are stored even with use_dpe off
        _add(rows, "global_dpe", 27 * C + C)
        _add(rows, "global_query", cfg.nq * C)
        _add(rows, "global_cross_mhra", 4 * C + 4 * linear_params(C, C))
        _add(rows, "global_ffn", 2 * C + linear_params(C, 4 * C) + linear_params(4 * C, C))
    if cfg.global_layers:
        _add(rows, "fusion", 1)
        if cfg.fusion == "parallel":
            _add(rows, "fusion", len(cfg.global_layers) * C * C)
    _add(rows, "norm", 2 * C)
    _add(rows, "head", linear_params(C, K))
    return CostReport(params_total=sum(rows.values()), params_breakdown=rows)


def count_flops(cfg: ModelConfig, views: int = 1) -> CostReport:
    """FLOPs of one clip, multiplied by ``views`` (crops x clips)."""
    C, K = cfg.width, cfg.num_classes
    T, H, W = cfg.grid
    Ci, t = cfg.inner_width, cfg.tube
    n = H * W + 1  # tokens per frame incl. class token
    tok = T * n
    L = T * H * W
    rows: dict[str, int] = OrderedDict()

    _add(rows, "embed", linear_flops(L, 3 * 3 * cfg.patch_size**2, C))
    for i in range(1, cfg.depth + 1):
        for _ in range(cfg.local_count(i)):
            _add(rows, "lt_mhra", linear_flops(tok, C, Ci) + 2 * tok * Ci * t + linear_flops(tok, Ci, C))
        _add(rows, "gs_mhra_proj", 4 * linear_flops(tok, C, C))
        # QK^T and AV, each n*n*C MACs per frame
        _add(rows, "spatial_attention", T * (2 * n * n * C + 2 * n * n * C))
        _add(rows, "ffn", linear_flops(tok, C, 4 * C) + linear_flops(tok, 4 * C, C))
    for k, _ in enumerate(cfg.global_layers):
        nq, Lk = cfg.nq, L
        if k > 0 and cfg.fusion == "sequential":
            nq = 1
        elif k > 0 and cfg.fusion == "hierarchical_q":
            nq += 1
        elif k > 0 and cfg.fusion == "hierarchical_kv":
            Lk += 1
        if cfg.use_dpe:
            _add(rows, "global_dpe", 2 * L * C * 27)
        _add(rows, "cross_proj", 2 * linear_flops(nq, C, C) + 2 * linear_flops(Lk, C, C))
        _add(rows, "cross_attention", 2 * nq * Lk * C + 2 * nq * Lk * C)
        _add(rows, "global_ffn", linear_flops(nq, C, 4 * C) + linear_flops(nq, 4 * C, C))
    if cfg.global_layers and cfg.fusion == "parallel":
        _add(rows, "fusion", linear_flops(1, len(cfg.global_layers) * C, C))
    _add(rows, "head", linear_flops(1, C, K))
    if views != 1:
        rows = OrderedDict((k, v * views) for k, v in rows.items())
    return CostReport(flops_total=sum(rows.values()), flops_breakdown=rows, views=views)


def cost_report(cfg: ModelConfig, views: int = 1) -> CostReport:
    p, f = count_params(cfg), count_flops(cfg, views)
    return CostReport(p.params_total, f.flops_total, p.params_breakdown, f.flops_breakdown, views)
