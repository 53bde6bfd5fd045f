import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uf2.config import FUSION_STRATEGIES
from uf2.errors import ConfigError
from uf2.fusion import FusionWeights, combine, fuse, run_stages
from uf2.global_block import global_uniblock_forward
from uf2.gradcheck import random_global_weights, random_grid
from uf2.reference import ref_fuse

from conftest import rel_err

C, HEADS = 4, 2


def make_stages(rng, n, nq=1):
    return [(random_global_weights(rng, C, nq), random_grid(rng, 2, 2, 2, C)) for _ in range(n)]


def test_single_stage_sequential(rng):
    stages = make_stages(rng, 1)
    w, x = stages[0]
    F = fuse(stages, FusionWeights("sequential"), HEADS)
    np.testing.assert_array_equal(F, global_uniblock_forward(w.query, x, w, HEADS)[0])


def test_parallel_selector(rng):
    stages = make_stages(rng, 3)
    tokens = run_stages(stages, "parallel", HEADS)
    for k in range(3):
        proj = np.zeros((3 * C, C))
        proj[k * C:(k + 1) * C] = np.eye(C)
        F = fuse(stages, FusionWeights("parallel", proj=proj), HEADS)
        np.testing.assert_allclose(F, tokens[k], rtol=1e-15)


def test_sequential_manual_chain(rng):
    stages = make_stages(rng, 3)
    (w1, x1), (w2, x2), (w3, x3) = stages
    g1 = global_uniblock_forward(w1.query, x1, w1, HEADS)
    g2 = global_uniblock_forward(g1, x2, w2, HEADS)
    g3 = global_uniblock_forward(g2, x3, w3, HEADS)
    np.testing.assert_allclose(fuse(stages, FusionWeights("sequential"), HEADS), g3[0], rtol=1e-14)


def test_sequential_with_earlier_stages_silenced(rng):
    stages = make_stages(rng, 3)
    for w, _ in stages[:-1]:
        w.wo[:] = 0
        w.bo[:] = 0
        w.ffn.w2[:] = 0
        w.ffn.b2[:] = 0
    w, x = stages[-1]
    single = global_uniblock_forward(np.zeros((1, C)), x, w, HEADS)
    np.testing.assert_allclose(fuse(stages, FusionWeights("sequential"), HEADS), single[0], atol=1e-15)


@pytest.mark.parametrize("strategy", FUSION_STRATEGIES)
@pytest.mark.parametrize("seed", range(3))
def test_strategies_match_oracle(strategy, seed):
    rng = np.random.default_rng(seed)
    stages = make_stages(rng, 3, nq=2)
    proj = rng.standard_normal((3 * C, C)) / C if strategy == "parallel" else None
    got = fuse(stages, FusionWeights(strategy, proj=proj), HEADS)
    ref, _ = ref_fuse([(w, x.patch_tokens) for w, x in stages], strategy, HEADS, True, proj)
    assert rel_err(got, ref) <= 1e-10


@pytest.mark.parametrize("strategy", FUSION_STRATEGIES)
def test_zero_init_gives_zero_token(rng, strategy):
    stages = make_stages(rng, 3)
    for w, _ in stages:
        w.query[:] = 0
        w.wo[:] = 0
        w.bo[:] = 0
        w.ffn.w2[:] = 0
        w.ffn.b2[:] = 0
    proj = rng.standard_normal((3 * C, C)) if strategy == "parallel" else None
    F = fuse(stages, FusionWeights(strategy, proj=proj), HEADS)
    np.testing.assert_array_equal(F, np.zeros(C))
    F_c = rng.standard_normal(C)
    np.testing.assert_array_equal(combine(F, F_c, 0.0), 0.5 * F_c)


def test_errors(rng):
    with pytest.raises(ConfigError):
        fuse(make_stages(rng, 1), FusionWeights("bogus"), HEADS)
    with pytest.raises(ConfigError):
        fuse(make_stages(rng, 2), FusionWeights("parallel"), HEADS)
    with pytest.raises(ConfigError):
        fuse([], FusionWeights("sequential"), HEADS)


def test_combine_examples(rng):
    F, F_c = rng.standard_normal(5), rng.standard_normal(5)
    np.testing.assert_allclose(combine(F, F_c, 0.0), 0.5 * (F + F_c), rtol=1e-15)
    assert np.abs(combine(F, F_c, 100.0) - F).max() <= 1e-10


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8),
    st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8),
    st.floats(-50, 50),
)
def test_combine_convexity(f, fc, a):
    n = min(len(f), len(fc))
    F, F_c = np.array(f[:n]), np.array(fc[:n])
    Z = combine(F, F_c, a)
    lo, hi = np.minimum(F, F_c), np.maximum(F, F_c)
    slack = 1e-12 * (1 + np.abs(F) + np.abs(F_c))
    assert np.all(Z >= lo - slack) and np.all(Z <= hi + slack)
