"""Naive scalar-loop reference implementations.

Nothing here calls the vectorised kernels; these exist to be compared against
them. Inputs are numpy arrays, arithmetic is plain Python floats.
"""

from __future__ import annotations

import math

import numpy as np

from .config import ModelConfig

EPS = 1e-5


def ref_matmul(a, b):
    a, b = np.asarray(a).tolist(), np.asarray(b).tolist()
    m, k, n = len(a), len(b), len(b[0])
    return np.array([[sum(a[i][p] * b[p][j] for p in range(k)) for j in range(n)] for i in range(m)])


def ref_softmax(row):
    row = list(row)
    top = max(row)
    e = [math.exp(v - top) for v in row]
    s = sum(e)
    return [v / s for v in e]


def ref_layer_norm(v, g, b, eps=EPS):
    v = list(v)
    n = len(v)
    mu = sum(v) / n
    var = sum((x - mu) ** 2 for x in v) / n
    return [(x - mu) / math.sqrt(var + eps) * float(g[i]) + float(b[i]) for i, x in enumerate(v)]


def ref_linear(v, w, b=None):
    w = np.asarray(w)
    cin, cout = w.shape
    wl = w.tolist()
    return [
        sum(float(v[i]) * wl[i][j] for i in range(cin)) + (float(b[j]) if b is not None else 0.0)
        for j in range(cout)
    ]


def ref_gelu(x):
    return 0.5 * x * (1.0 + math.erf(x / math.sqrt(2.0)))


def ref_dw_temporal(x, k):
    x, k = np.asarray(x), np.asarray(k)
    T, S, C = x.shape
    t = k.shape[0]
    half = t // 2
    out = np.zeros(x.shape)
    for tau in range(T):
        for s in range(S):
            for c in range(C):
                acc = 0.0
                for j in range(t):
                    src = tau + j - half
                    if 0 <= src < T:
                        acc += float(k[j, c]) * float(x[src, s, c])
                out[tau, s, c] = acc
    return out


def ref_dw3d(x, k):
    x, k = np.asarray(x), np.asarray(k)
    T, H, W, C = x.shape
    kt, kh, kw, _ = k.shape
    out = np.zeros(x.shape)
    for t in range(T):
        for h in range(H):
            for w in range(W):
                for c in range(C):
                    acc = 0.0
                    for a in range(kt):
                        for b in range(kh):
                            for d in range(kw):
                                tt, hh, ww = t + a - kt // 2, h + b - kh // 2, w + d - kw // 2
                                if 0 <= tt < T and 0 <= hh < H and 0 <= ww < W:
                                    acc += float(k[a, b, d, c]) * float(x[tt, hh, ww, c])
                    out[t, h, w, c] = acc
    return out


def ref_patch_embed(video, conv_w, conv_b, cls, pos, patch, stride_t):
    """Returns ``T x (1 + H*W) x C`` frames, class token first."""
    video = np.asarray(video)
    _, Tin, Hin, Win = video.shape
    C, _, kt, _, _ = conv_w.shape
    H, W = Hin // patch, Win // patch
    T = (Tin + 2 * (kt // 2) - kt) // stride_t + 1
    vid = video.tolist()
    cw = conv_w.tolist()
    out = np.zeros((T, H * W + 1, C))
    for tau in range(T):
        for o in range(C):
            out[tau, 0, o] = float(cls[o]) + float(pos[0, o])
        for h in range(H):
            for w in range(W):
                for o in range(C):
                    acc = float(conv_b[o])
                    for ci in range(3):
                        for a in range(kt):
                            f = tau * stride_t + a - kt // 2
                            if not 0 <= f < Tin:
                                continue
                            rows = vid[ci][f]
                            wk = cw[o][ci][a]
                            for i in range(patch):
                                r = rows[h * patch + i]
                                wr = wk[i]
                                for j in range(patch):
                                    acc += wr[j] * r[w * patch + j]
                    out[tau, 1 + h * W + w, o] = acc + float(pos[1 + h * W + w, o])
    return out


def ref_lt_mhra(frames, w):
    """LT_MHRA on ``T x S x C`` frames, residual included."""
    frames = np.asarray(frames)
    T, S, C = frames.shape
    Ci = w.down_w.shape[1]
    down = np.zeros((T, S, Ci))
    for t in range(T):
        for s in range(S):
            bn = [
                (float(frames[t, s, c]) - float(w.bn_mean[c])) / math.sqrt(float(w.bn_var[c]) + EPS)
                * float(w.bn_gamma[c]) + float(w.bn_beta[c])
                for c in range(C)
            ]
            down[t, s] = ref_linear(bn, w.down_w, w.down_b)
    conv = ref_dw_temporal(down, w.kernel)
    out = np.zeros(frames.shape)
    for t in range(T):
        for s in range(S):
            up = ref_linear(conv[t, s], w.up_w, w.up_b)
            for c in range(C):
                out[t, s, c] = float(frames[t, s, c]) + up[c]
    return out


def ref_attention(queries, keys_values, w_q, b_q, w_k, b_k, w_v, b_v, w_o, b_o, heads):
    """Brute-force multi-head attention: each query row against every context row."""
    C = len(queries[0])
    d = C // heads
    Q = [ref_linear(r, w_q, b_q) for r in queries]
    K = [ref_linear(r, w_k, b_k) for r in keys_values]
    V = [ref_linear(r, w_v, b_v) for r in keys_values]
    outs = []
    for qi in Q:
        cat = []
        for n in range(heads):
            sl = range(n * d, (n + 1) * d)
            scores = [sum(qi[c] * kj[c] for c in sl) / math.sqrt(d) for kj in K]
            a = ref_softmax(scores)
            cat += [sum(a[j] * V[j][c] for j in range(len(V))) for c in sl]
        outs.append(ref_linear(cat, w_o, b_o))
    return outs


def ref_gs_mhra(frames, w, heads):
    frames = np.asarray(frames)
    out = np.zeros(frames.shape)
    for t in range(frames.shape[0]):
        normed = [ref_layer_norm(tok, w.ln_gamma, w.ln_beta) for tok in frames[t].tolist()]
        att = ref_attention(normed, normed, w.wq, w.bq, w.wk, w.bk, w.wv, w.bv, w.wo, w.bo, heads)
        for s in range(frames.shape[1]):
            out[t, s] = [float(frames[t, s, c]) + att[s][c] for c in range(frames.shape[2])]
    return out


def ref_ffn_vec(v, w):
    h = ref_linear(ref_layer_norm(v, w.ln_gamma, w.ln_beta), w.w1, w.b1)
    h = [ref_gelu(x) for x in h]
    y = ref_linear(h, w.w2, w.b2)
    return [float(v[c]) + y[c] for c in range(len(y))]


def ref_ffn(x, w):
    x = np.asarray(x)
    flat = x.reshape(-1, x.shape[-1])
    return np.array([ref_ffn_vec(r, w) for r in flat.tolist()]).reshape(x.shape)


def ref_local_block(frames, w, heads):
    h = np.asarray(frames)
    if len(w.lt) >= 1:
        h = ref_lt_mhra(h, w.lt[0])
    h = ref_gs_mhra(h, w.attn, heads)
    if len(w.lt) == 2:
        h = ref_lt_mhra(h, w.lt[1])
    return ref_ffn(h, w.ffn)


def ref_dpe(patch, w):
    patch = np.asarray(patch)
    conv = ref_dw3d(patch, w.dpe_kernel)
    out = np.zeros(patch.shape)
    T, H, W, C = patch.shape
    for t in range(T):
        for h in range(H):
            for x in range(W):
                for c in range(C):
                    out[t, h, x, c] = float(patch[t, h, x, c]) + conv[t, h, x, c] + float(w.dpe_bias[c])
    return out


def ref_cross_mhra(q, context, w, heads):
    """``q``: rows of queries; ``context``: rows of key/value tokens."""
    qn = [ref_layer_norm(r, w.ln_q_gamma, w.ln_q_beta) for r in np.atleast_2d(q).tolist()]
    xn = [ref_layer_norm(r, w.ln_x_gamma, w.ln_x_beta) for r in np.asarray(context).tolist()]
    return np.array(ref_attention(qn, xn, w.wq, w.bq, w.wk, w.bk, w.wv, w.bv, w.wo, w.bo, heads))


def ref_global_block(q, patch, w, heads, use_dpe=True, extra=None):
    patch = np.asarray(patch)
    xc = ref_dpe(patch, w) if use_dpe else patch
    ctx = [list(r) for r in xc.reshape(-1, xc.shape[-1]).tolist()]
    if extra is not None:
        ctx = [list(r) for r in np.atleast_2d(extra).tolist()] + ctx
    xst = ref_cross_mhra(q, ctx, w, heads)
    return ref_ffn(xst, w.ffn)


def ref_fuse(stages, strategy, heads, use_dpe=True, proj=None):
    """``stages``: list of (GlobalBlockWeights, patch tokens T x H x W x C)."""
    tokens = []
    for i, (w, patch) in enumerate(stages):
        q, extra = [list(r) for r in np.atleast_2d(w.query).tolist()], None
        if i > 0:
            prev = [list(tokens[-1])]
            if strategy == "sequential":
                q = prev
            elif strategy == "hierarchical_kv":
                extra = prev
            elif strategy == "hierarchical_q":
                q = prev + q
        out = ref_global_block(q, patch, w, heads, use_dpe, extra)
        rows = out.tolist()
        tokens.append([sum(r[c] for r in rows) / len(rows) for c in range(len(rows[0]))])
    if strategy == "parallel":
        cat = [v for tok in tokens for v in tok]
        return np.array(ref_linear(cat, proj)), tokens
    return np.array(tokens[-1]), tokens


def ref_forward(video, cfg: ModelConfig, weights) -> np.ndarray:
    """Layer-by-layer replay of the full model using only the loops above."""
    e = weights.embed()
    frames = ref_patch_embed(video, e.conv_w, e.conv_b, e.cls, e.pos, cfg.patch_size, cfg.stride_t)
    T, H, W = cfg.grid
    stages = []
    for i in range(1, cfg.depth + 1):
        frames = ref_local_block(frames, weights.local(i), cfg.heads)
        if i in cfg.global_layers:
            stages.append((weights.global_block(i), frames[:, 1:, :].reshape(T, H, W, cfg.width)))
    normed = [ref_layer_norm(frames[t, 0], weights["norm.gamma"], weights["norm.beta"]) for t in range(T)]
    f_c = [sum(n[c] for n in normed) / T for c in range(cfg.width)]
    if stages:
        proj = weights.params.get("fusion.proj")
        f, _ = ref_fuse(stages, cfg.fusion, cfg.heads, cfg.use_dpe, proj)
        alpha = 1.0 / (1.0 + math.exp(-float(weights["fusion.alpha_raw"][0])))
        z = [alpha * f[c] + (1 - alpha) * f_c[c] for c in range(cfg.width)]
    else:
        z = f_c
    return np.array(ref_linear(z, weights["head.w"], weights["head.b"]))
