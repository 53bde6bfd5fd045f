"""Raw clip files: little-endian float32 in C order ``[3, T, H, W]`` plus a
sidecar ``<file>.json`` holding ``{"shape": [3, T, H, W]}``."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeError


def sidecar(path: str | Path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".json")


def write_video(path: str | Path, video: np.ndarray) -> None:
    video = np.asarray(video)
    Path(path).write_bytes(video.astype("<f4").tobytes())
    sidecar(path).write_text(json.dumps({"shape": list(video.shape)}))


def read_video(path: str | Path) -> np.ndarray:
    try:
        header = json.loads(sidecar(path).read_text())
        raw = Path(path).read_bytes()
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read clip {path}: {e}") from e
    shape = tuple(int(s) for s in header.get("shape", ()))
    if len(shape) != 4 or shape[0] != 3:
        raise ShapeError(f"{path}: header shape must be [3, T, H, W], got {list(shape)}")
    n = int(np.prod(shape))
    if len(raw) != 4 * n:
        raise ShapeError(f"{path}: {len(raw)} bytes but header implies {4 * n}")
    return np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float64)
