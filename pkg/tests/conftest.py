import numpy as np
import pytest

from uf2.config import ModelConfig


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def tiny_config(**changes) -> ModelConfig:
    """D=2, C=8, N=2, 2x2 grid from 32x32 input, two frames after downsampling."""
    base = dict(
        width=8, heads=2, depth=2, frames=4, resolution=32,
        local_mhra_layers=(1, 2), local_mhra_count=1, reduction=2.0,
        global_layers=(1, 2), num_classes=5,
    )
    base.update(changes)
    return ModelConfig(**base)


def rel_err(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))
