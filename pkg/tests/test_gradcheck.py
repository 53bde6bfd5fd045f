import numpy as np
import pytest

from uf2.embed import TokenGrid
from uf2.gradcheck import (
    DEFAULT_SIZES,
    GradReport,
    backward_combine,
    backward_cross_mhra,
    backward_dpe,
    backward_lt_mhra,
    numeric_grad,
    random_global_weights,
    random_grid,
    random_lt_weights,
    rel_error,
    run_gradcheck,
    run_many,
    thread_count,
)
from uf2.global_block import cross_mhra
from uf2.local_block import lt_mhra_tokens
from uf2.tensor import layer_norm


def test_zero_upstream_lt(rng):
    x = rng.standard_normal((3, 5, 4))
    w = random_lt_weights(rng, 4, 2, 3)
    for g in backward_lt_mhra(x, w, np.zeros_like(x)).values():
        assert not np.any(g)


def test_zero_upstream_cross(rng):
    w = random_global_weights(rng, 4)
    g = backward_cross_mhra(w.query, random_grid(rng, 2, 2, 2, 4), w, 2, np.zeros((1, 4)))
    assert all(not np.any(v) for v in g.values())


def test_lt_identity_configuration(rng):
    # delta kernel, identity down/up, no BN shift: grad x = G + chain term through the BN scale
    C = 4
    x = rng.standard_normal((3, 5, C))
    w = random_lt_weights(rng, C, C, 3)
    w.kernel[:] = 0
    w.kernel[1] = 1
    w.down_w[:] = np.eye(C)
    w.up_w[:] = np.eye(C)
    G = rng.standard_normal(x.shape)
    scale = w.bn_gamma / np.sqrt(w.bn_var + 1e-5)
    np.testing.assert_allclose(backward_lt_mhra(x, w, G)["x"], G * (1 + scale), rtol=1e-13)
    num = numeric_grad(lambda: float((G * lt_mhra_tokens(x, w)).sum()), x)
    assert rel_error(G * (1 + scale), num) <= 1e-8


def test_cross_zero_U_structure(rng):
    w = random_global_weights(rng, 4)
    w.wo[:] = 0
    G = rng.standard_normal((1, 4))
    g = backward_cross_mhra(w.query, random_grid(rng, 2, 2, 2, 4), w, 2, G)
    assert np.any(g["wo"])
    for name in ("wq", "bq", "wk", "bk", "wv", "bv", "q", "x_patch"):
        assert not np.any(g[name]), name


def test_cross_single_token_is_linear_map(rng):
    C = 4
    x = random_grid(rng, 1, 1, 1, C)
    w = random_global_weights(rng, C)
    G = rng.standard_normal((1, C))
    g = backward_cross_mhra(w.query, x, w, 2, G)
    xn = layer_norm(x.flat_patches(), w.ln_x_gamma, w.ln_x_beta)
    assert np.abs(g["wq"]).max() < 1e-14 and np.abs(g["wk"]).max() < 1e-14
    assert np.abs(g["q"]).max() < 1e-14
    np.testing.assert_allclose(g["wv"], xn.T @ (G @ w.wo.T), rtol=1e-12)
    np.testing.assert_allclose(g["bv"], (G @ w.wo.T)[0], rtol=1e-12)


def test_key_bias_gradient_is_zero(rng):
    # softmax rows are shift invariant, so the key bias never moves the output
    w = random_global_weights(rng, 4, nq=2)
    x = random_grid(rng, 2, 2, 2, 4)
    G = rng.standard_normal((2, 4))
    analytic = backward_cross_mhra(w.query, x, w, 2, G)["bk"]
    numeric = numeric_grad(lambda: float((G * cross_mhra(w.query, x, w, 2)).sum()), w.bk)
    assert np.abs(analytic).max() < 1e-12
    assert np.abs(numeric).max() < 1e-8


def test_excluded_paths_are_exactly_zero(rng):
    w = random_global_weights(rng, 4)
    x = random_grid(rng, 2, 2, 2, 4)
    up = TokenGrid(np.zeros_like(x.patch_tokens), rng.standard_normal(x.class_tokens.shape))
    g = backward_dpe(x, w, up)
    assert not np.any(g["dpe_kernel"]) and not np.any(g["dpe_bias"])
    assert not np.any(g["x_patch"])
    cg = backward_cross_mhra(w.query, x, w, 2, rng.standard_normal((1, 4)))
    assert not np.any(cg["x_class"])


def test_combine_at_zero(rng):
    F, F_c, G = rng.standard_normal((3, 6))
    g = backward_combine(F, F_c, 0.0, G)
    assert g["alpha_raw"][0] == pytest.approx(0.25 * G @ (F - F_c), rel=1e-15)
    np.testing.assert_array_equal(g["F"], 0.5 * G)
    assert backward_combine(F, F, 1.3, G)["alpha_raw"][0] == 0


def test_combine_random_tight(rng):
    from uf2.fusion import combine

    F, F_c, G = rng.standard_normal((3, 6))
    a = np.array([0.7])
    num = numeric_grad(lambda: float(G @ combine(F, F_c, a[0])), a)
    assert rel_error(backward_combine(F, F_c, 0.7, G)["alpha_raw"], num) < 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_random_instances_tight(seed):
    for r in run_gradcheck(seed):
        if r.op in ("lt_mhra", "cross_mhra"):
            assert r.max_rel_error < 1e-6, r


def test_rel_error_definition():
    assert rel_error(np.array([1.0, 2.0]), np.array([1.0, 2.5])) == pytest.approx(0.2)
    assert rel_error(np.zeros(3), np.full(3, 1e-12)) == pytest.approx(1e-4)


def test_report_serialises():
    d = GradReport("dpe", "x", 1e-9, 1e-5, True).to_dict()
    assert d == {"op": "dpe", "param": "x", "max_rel_error": 1e-9, "tolerance": 1e-5, "pass": True}


def test_twenty_seeds_all_pass():
    reports = run_many(range(20))
    assert {r.op for r in reports} == {"lt_mhra", "cross_mhra", "dpe", "combine"}
    worst = max(reports, key=lambda r: r.max_rel_error)
    assert all(r.passed for r in reports), worst


def test_sizes_override():
    reports = run_gradcheck(3, {"T": 2, "C": 6, "heads": 3, "nq": 2, "tube": 5})
    assert all(r.passed for r in reports)


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("UF2_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("UF2_THREADS", "0")
    assert thread_count() is None
    monkeypatch.delenv("UF2_THREADS")
    assert thread_count() is None
    assert DEFAULT_SIZES["C"] % DEFAULT_SIZES["heads"] == 0
