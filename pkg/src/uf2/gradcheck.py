"""Reverse-mode gradients for LT_MHRA, cross MHRA, DPE and the gated combination,
checked against central finite differences.

Each ``backward_*`` returns gradients of ``L = sum(upstream * op(...))`` as a
dict keyed by input/parameter name.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Callable

import numpy as np

from .embed import TokenGrid
from .fusion import combine, sigmoid
from .global_block import GlobalBlockWeights, cross_mhra, dpe
from .local_block import BN_EPS, LN_EPS, FFNWeights, LTMHRAWeights, lt_mhra_tokens, merge_heads, split_heads
from .tensor import depthwise_conv3d, depthwise_conv_temporal, softmax_lastdim

STEP = 1e-5
TOLERANCE = 1e-5


@dataclass
class GradReport:
    op: str
    param: str
    max_rel_error: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


# -- backward passes -----------------------------------------------------


def backward_lt_mhra(x: np.ndarray, w: LTMHRAWeights, upstream: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients for the ``T x S x C`` LT_MHRA including BN statistics."""
    G = upstream
    std = np.sqrt(w.bn_var + BN_EPS)
    xh = (x - w.bn_mean) / std
    bn = xh * w.bn_gamma + w.bn_beta
    h1 = bn @ w.down_w + w.down_b
    h2 = depthwise_conv_temporal(h1, w.kernel)

    g = {}
    g["up_b"] = G.sum(axis=(0, 1))
    g["up_w"] = np.einsum("tsi,tsc->ic", h2, G)
    dh2 = G @ w.up_w.T

    t = w.kernel.shape[0]
    half = t // 2
    T = x.shape[0]
    h1p = np.pad(h1, ((half, half), (0, 0), (0, 0)))
    g["kernel"] = np.stack([(dh2 * h1p[k : k + T]).sum(axis=(0, 1)) for k in range(t)])
    dh1 = depthwise_conv_temporal(dh2, w.kernel[::-1])

    g["down_b"] = dh1.sum(axis=(0, 1))
    g["down_w"] = np.einsum("tsc,tsi->ci", bn, dh1)
    dbn = dh1 @ w.down_w.T

    g["bn_gamma"] = (dbn * xh).sum(axis=(0, 1))
    g["bn_beta"] = dbn.sum(axis=(0, 1))
    dxh = dbn * w.bn_gamma
    g["bn_mean"] = -(dxh / std).sum(axis=(0, 1))
    g["bn_var"] = (dxh * (x - w.bn_mean)).sum(axis=(0, 1)) * -0.5 * (w.bn_var + BN_EPS) ** -1.5
    g["x"] = G + dxh / std
    return g


def _ln_forward(x, gamma, beta):
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xh = (x - mu) * inv
    return xh * gamma + beta, (xh, inv)


def _ln_backward(dy, gamma, cache):
    xh, inv = cache
    dgamma = (dy * xh).reshape(-1, xh.shape[-1]).sum(axis=0)
    dbeta = dy.reshape(-1, xh.shape[-1]).sum(axis=0)
    dxh = dy * gamma
    dx = inv * (dxh - dxh.mean(axis=-1, keepdims=True) - xh * (dxh * xh).mean(axis=-1, keepdims=True))
    return dx, dgamma, dbeta


def backward_cross_mhra(
    q: np.ndarray,
    x: TokenGrid,
    w: GlobalBlockWeights,
    heads: int,
    upstream: np.ndarray,
) -> dict[str, np.ndarray]:
    """Gradients of cross MHRA w.r.t. the query, the token grid and every weight."""
    q = np.atleast_2d(q)
    X = x.flat_patches()
    C = X.shape[1]
    d = C // heads
    qn, qcache = _ln_forward(q, w.ln_q_gamma, w.ln_q_beta)
    xn, xcache = _ln_forward(X, w.ln_x_gamma, w.ln_x_beta)
    Q = qn @ w.wq + w.bq
    K = xn @ w.wk + w.bk
    V = xn @ w.wv + w.bv
    Qh, Kh, Vh = split_heads(Q, heads), split_heads(K, heads), split_heads(V, heads)
    A = softmax_lastdim(Qh @ np.swapaxes(Kh, -1, -2) / np.sqrt(d))
    M = merge_heads(A @ Vh)

    G = np.atleast_2d(upstream)
    g = {}
    g["bo"] = G.sum(axis=0)
    g["wo"] = M.T @ G
    dO = split_heads(G @ w.wo.T, heads)
    dA = dO @ np.swapaxes(Vh, -1, -2)
    dVh = np.swapaxes(A, -1, -2) @ dO
    dS = A * (dA - (dA * A).sum(axis=-1, keepdims=True)) / np.sqrt(d)
    dQ = merge_heads(dS @ Kh)
    dK = merge_heads(np.swapaxes(dS, -1, -2) @ Qh)
    dV = merge_heads(dVh)

    g["wq"], g["bq"] = qn.T @ dQ, dQ.sum(axis=0)
    g["wk"], g["bk"] = xn.T @ dK, dK.sum(axis=0)
    g["wv"], g["bv"] = xn.T @ dV, dV.sum(axis=0)
    dq, g["ln_q_gamma"], g["ln_q_beta"] = _ln_backward(dQ @ w.wq.T, w.ln_q_gamma, qcache)
    dX, g["ln_x_gamma"], g["ln_x_beta"] = _ln_backward(dK @ w.wk.T + dV @ w.wv.T, w.ln_x_gamma, xcache)
    g["q"] = dq
    g["x_patch"] = dX.reshape(x.patch_tokens.shape)
    g["x_class"] = np.zeros_like(x.class_tokens)
    return g


def backward_dpe(x: TokenGrid, w: GlobalBlockWeights, upstream: TokenGrid) -> dict[str, np.ndarray]:
    Gp = upstream.patch_tokens
    kt, kh, kw, _ = w.dpe_kernel.shape
    T, H, W, _ = Gp.shape
    xp = np.pad(x.patch_tokens, ((kt // 2,) * 2, (kh // 2,) * 2, (kw // 2,) * 2, (0, 0)))
    dk = np.empty_like(w.dpe_kernel)
    for a in range(kt):
        for b in range(kh):
            for c in range(kw):
                dk[a, b, c] = (Gp * xp[a : a + T, b : b + H, c : c + W]).sum(axis=(0, 1, 2))
    return {
        "x_patch": Gp + depthwise_conv3d(Gp, w.dpe_kernel[::-1, ::-1, ::-1]),
        "x_class": upstream.class_tokens.copy(),
        "dpe_kernel": dk,
        "dpe_bias": Gp.sum(axis=(0, 1, 2)),
    }


def backward_combine(F, F_c, alpha_raw: float, upstream) -> dict[str, np.ndarray]:
    a = sigmoid(alpha_raw)
    G = np.asarray(upstream)
    return {
        "F": a * G,
        "F_c": (1.0 - a) * G,
        "alpha_raw": np.array([a * (1.0 - a) * float(G @ (np.asarray(F) - np.asarray(F_c)))]),
    }


# -- finite differences --------------------------------------------------


def numeric_grad(loss: Callable[[], float], arr: np.ndarray, h: float = STEP) -> np.ndarray:
    """Central differences of ``loss()`` w.r.t. every element of ``arr`` (perturbed in place, restored)."""
    grad = np.zeros_like(arr)
    flat, gflat = arr.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = loss()
        flat[i] = old - h
        down = loss()
        flat[i] = old
        gflat[i] = (up - down) / (2 * h)
    return grad


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``max|a - n| / max(max|a|, max|n|, 1e-8)`` over the whole tensor."""
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    denom = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-8)
    return float(np.abs(analytic - numeric).max(initial=0.0) / denom)


def _report(op, name, analytic, numeric, tol) -> GradReport:
    err = rel_error(analytic, numeric)
    return GradReport(op, name, err, tol, err <= tol)


# -- random tiny instances -----------------------------------------------

DEFAULT_SIZES = {"T": 3, "H": 2, "W": 2, "C": 4, "heads": 2, "inner": 2, "tube": 3, "nq": 1}


def random_lt_weights(rng: np.random.Generator, C: int, inner: int, tube: int) -> LTMHRAWeights:
    return LTMHRAWeights(
        bn_mean=0.1 * rng.standard_normal(C),
        bn_var=rng.uniform(0.5, 1.5, C),
        bn_gamma=1 + 0.1 * rng.standard_normal(C),
        bn_beta=0.1 * rng.standard_normal(C),
        down_w=rng.standard_normal((C, inner)) / np.sqrt(C),
        down_b=0.1 * rng.standard_normal(inner),
        kernel=0.5 * rng.standard_normal((tube, inner)),
        up_w=rng.standard_normal((inner, C)) / np.sqrt(inner),
        up_b=0.1 * rng.standard_normal(C),
    )


def random_global_weights(rng: np.random.Generator, C: int, nq: int = 1) -> GlobalBlockWeights:
    def mat():
        return rng.standard_normal((C, C)) / np.sqrt(C)

    def vec(scale=0.1):
        return scale * rng.standard_normal(C)

    return GlobalBlockWeights(
        dpe_kernel=0.3 * rng.standard_normal((3, 3, 3, C)),
        dpe_bias=vec(),
        query=0.5 * rng.standard_normal((nq, C)),
        ln_q_gamma=1 + vec(), ln_q_beta=vec(),
        ln_x_gamma=1 + vec(), ln_x_beta=vec(),
        wq=mat(), bq=vec(), wk=mat(), bk=vec(), wv=mat(), bv=vec(), wo=mat(), bo=vec(),
        ffn=FFNWeights(
            ln_gamma=1 + vec(), ln_beta=vec(),
            w1=rng.standard_normal((C, 4 * C)) / np.sqrt(C), b1=0.1 * rng.standard_normal(4 * C),
            w2=rng.standard_normal((4 * C, C)) / np.sqrt(4 * C), b2=vec(),
        ),
    )


def random_grid(rng: np.random.Generator, T: int, H: int, W: int, C: int) -> TokenGrid:
    return TokenGrid(rng.standard_normal((T, H, W, C)), rng.standard_normal((T, C)))


def check_lt_mhra(rng, s, tol=TOLERANCE) -> list[GradReport]:
    x = rng.standard_normal((s["T"], s["H"] * s["W"] + 1, s["C"]))
    w = random_lt_weights(rng, s["C"], s["inner"], s["tube"])
    G = rng.standard_normal(x.shape)
    grads = backward_lt_mhra(x, w, G)

    def loss():
        return float((G * lt_mhra_tokens(x, w)).sum())

    out = [_report("lt_mhra", "x", grads["x"], numeric_grad(loss, x), tol)]
    for f in fields(LTMHRAWeights):
        out.append(_report("lt_mhra", f.name, grads[f.name], numeric_grad(loss, getattr(w, f.name)), tol))
    return out


# bk is absent: a key bias shifts every score of a softmax row equally, so its
# gradient is identically zero and only finite-difference noise (~1e-11) remains.
# tests/test_gradcheck.py asserts that zero directly.
_CROSS_PARAMS = ("ln_q_gamma", "ln_q_beta", "ln_x_gamma", "ln_x_beta", "wq", "bq", "wk", "wv", "bv", "wo", "bo")


def check_cross_mhra(rng, s, tol=TOLERANCE) -> list[GradReport]:
    x = random_grid(rng, s["T"], s["H"], s["W"], s["C"])
    w = random_global_weights(rng, s["C"], s["nq"])
    q = w.query
    G = rng.standard_normal((s["nq"], s["C"]))
    grads = backward_cross_mhra(q, x, w, s["heads"], G)

    def loss():
        return float((G * cross_mhra(q, x, w, s["heads"])).sum())

    out = [
        _report("cross_mhra", "q", grads["q"], numeric_grad(loss, q), tol),
        _report("cross_mhra", "x_patch", grads["x_patch"], numeric_grad(loss, x.patch_tokens), tol),
        _report("cross_mhra", "x_class", grads["x_class"], numeric_grad(loss, x.class_tokens), tol),
    ]
    for name in _CROSS_PARAMS:
        out.append(_report("cross_mhra", name, grads[name], numeric_grad(loss, getattr(w, name)), tol))
    return out


def check_dpe(rng, s, tol=TOLERANCE) -> list[GradReport]:
    x = random_grid(rng, s["T"], s["H"], s["W"], s["C"])
    w = random_global_weights(rng, s["C"])
    G = random_grid(rng, s["T"], s["H"], s["W"], s["C"])
    grads = backward_dpe(x, w, G)

    def loss():
        y = dpe(x, w)
        return float((G.patch_tokens * y.patch_tokens).sum() + (G.class_tokens * y.class_tokens).sum())

    return [
        _report("dpe", "x_patch", grads["x_patch"], numeric_grad(loss, x.patch_tokens), tol),
        _report("dpe", "x_class", grads["x_class"], numeric_grad(loss, x.class_tokens), tol),
        _report("dpe", "dpe_kernel", grads["dpe_kernel"], numeric_grad(loss, w.dpe_kernel), tol),
        _report("dpe", "dpe_bias", grads["dpe_bias"], numeric_grad(loss, w.dpe_bias), tol),
    ]


def check_combine(rng, s, tol=TOLERANCE) -> list[GradReport]:
    F, F_c = rng.standard_normal(s["C"]), rng.standard_normal(s["C"])
    alpha = np.array([rng.standard_normal()])
    G = rng.standard_normal(s["C"])
    grads = backward_combine(F, F_c, float(alpha[0]), G)

    def loss():
        return float(G @ combine(F, F_c, alpha[0]))

    return [
        _report("combine", "F", grads["F"], numeric_grad(loss, F), tol),
        _report("combine", "F_c", grads["F_c"], numeric_grad(loss, F_c), tol),
        _report("combine", "alpha_raw", grads["alpha_raw"], numeric_grad(loss, alpha), tol),
    ]


CHECKS = {
    "lt_mhra": check_lt_mhra,
    "cross_mhra": check_cross_mhra,
    "dpe": check_dpe,
    "combine": check_combine,
}


def run_gradcheck(seed: int, sizes: dict | None = None, tolerance: float = TOLERANCE) -> list[GradReport]:
    """Every backward op on one seeded random tiny instance (64-bit)."""
    s = {**DEFAULT_SIZES, **(sizes or {})}
    reports = []
    for k, (name, check) in enumerate(CHECKS.items()):
        rng = np.random.default_rng([seed, k])
        reports += check(rng, s, tolerance)
    return reports


def thread_count() -> int | None:
    """``UF2_THREADS`` (0 or unset means let the executor decide)."""
    n = int(os.environ.get("UF2_THREADS", "0") or 0)
    return n if n > 0 else None


def run_many(seeds, sizes: dict | None = None, tolerance: float = TOLERANCE) -> list[GradReport]:
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = pool.map(lambda s: run_gradcheck(s, sizes, tolerance), seeds)
    return [r for batch in results for r in batch]
