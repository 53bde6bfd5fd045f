"""Model configuration and named presets."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

FUSION_STRATEGIES = ("sequential", "parallel", "hierarchical_kv", "hierarchical_q")


@dataclass(frozen=True)
class ModelConfig:
    """Every architectural knob. Layer indices are 1-based."""

    width: int = 768
    heads: int = 12
    depth: int = 12
    frames: int = 8
    resolution: int = 224
    patch_size: int = 16
    temporal_downsample: bool = True
    local_mhra_layers: tuple[int, ...] = ()
    local_mhra_count: int = 0
    reduction: float = 1.5
    tube: int = 3
    global_layers: tuple[int, ...] = (9, 10, 11, 12)
    use_dpe: bool = True
    fusion: str = "sequential"
    nq: int = 1
    num_classes: int = 400
    dtype: str = "float64"

    def __post_init__(self):
        # normalise list inputs coming from JSON
        object.__setattr__(self, "local_mhra_layers", tuple(int(i) for i in self.local_mhra_layers))
        object.__setattr__(self, "global_layers", tuple(int(i) for i in self.global_layers))
        self.validate()

    def validate(self) -> None:
        for name in ("width", "heads", "depth", "frames", "resolution", "patch_size", "nq", "num_classes"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.width % self.heads:
            raise ConfigError(f"width {self.width} not divisible by heads {self.heads}")
        if self.resolution % self.patch_size:
            raise ConfigError(f"resolution {self.resolution} not divisible by patch size {self.patch_size}")
        if self.temporal_downsample and self.frames % 2:
            raise ConfigError(f"temporal downsampling needs an even frame count, got {self.frames}")
        if self.local_mhra_count not in (0, 1, 2):
            raise ConfigError(f"local_mhra_count must be 0, 1 or 2, got {self.local_mhra_count}")
        if self.reduction <= 0 or self.inner_width < 1:
            raise ConfigError(f"reduction {self.reduction} leaves no inner channels")
        if self.tube < 1 or self.tube % 2 == 0:
            raise ConfigError(f"tube length must be odd, got {self.tube}")
        layers = range(1, self.depth + 1)
        if any(i not in layers for i in self.local_mhra_layers):
            raise ConfigError(f"local_mhra_layers {self.local_mhra_layers} outside 1..{self.depth}")
        if any(i not in layers for i in self.global_layers):
            raise ConfigError(f"global_layers {self.global_layers} outside 1..{self.depth}")
        if list(self.global_layers) != sorted(set(self.global_layers)):
            raise ConfigError(f"global_layers must be strictly ascending, got {self.global_layers}")
        if self.fusion not in FUSION_STRATEGIES:
            raise ConfigError(f"unknown fusion strategy {self.fusion!r}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")

    @property
    def inner_width(self) -> int:
        return math.floor(self.width / self.reduction)

    @property
    def stride_t(self) -> int:
        return 2 if self.temporal_downsample else 1

    @property
    def grid(self) -> tuple[int, int, int]:
        s = self.resolution // self.patch_size
        return self.frames // self.stride_t, s, s

    @property
    def num_tokens(self) -> int:
        T, H, W = self.grid
        return T * H * W

    def local_count(self, layer: int) -> int:
        """Number of LT_MHRA instances in 1-based ``layer``."""
        return self.local_mhra_count if layer in self.local_mhra_layers else 0

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["local_mhra_layers"] = list(self.local_mhra_layers)
        d["global_layers"] = list(self.global_layers)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def load(cls, path: str | Path) -> "ModelConfig":
        """Load a JSON config file or, failing that, a preset by name."""
        p = Path(path)
        if not p.exists():
            if str(path) in PRESETS:
                return PRESETS[str(path)]
            raise ConfigError(f"config {path} is neither a file nor a preset")
        try:
            d = json.loads(p.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}") from e
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(d)


def _layers(a: int, b: int) -> tuple[int, ...]:
    return tuple(range(a, b + 1))


PRESETS: dict[str, ModelConfig] = {
    # spatial-only ViT-B/16, SSV2 16-frame setting
    "vit-b16-spatial": ModelConfig(
        frames=16, global_layers=(), num_classes=174,
    ),
    "uf2-b16-k400": ModelConfig(
        frames=8, global_layers=_layers(9, 12), num_classes=400,
    ),
    "uf2-b16-ssv2": ModelConfig(
        frames=16,
        local_mhra_layers=_layers(1, 12),
        local_mhra_count=2,
        reduction=1.5,
        global_layers=_layers(5, 12),
        num_classes=174,
    ),
    "uf2-l14-k400": ModelConfig(
        width=1024, heads=16, depth=24, patch_size=14,
        frames=8, global_layers=_layers(21, 24), num_classes=400,
    ),
    # desk-scale config used by tests and examples
    "tiny": ModelConfig(
        width=8, heads=2, depth=2, frames=4, resolution=32,
        local_mhra_layers=(1, 2), local_mhra_count=1, reduction=2.0,
        global_layers=(1, 2), num_classes=5,
    ),
}
