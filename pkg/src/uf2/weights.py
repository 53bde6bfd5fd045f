"""Named parameter store, initialisation schemes and the on-disk format.

On disk a weight store is a directory holding

* ``manifest.json`` -- ordered list of ``{"name", "shape", "dtype"}``
* ``params.bin`` -- the raw little-endian values concatenated in manifest order
"""

from __future__ import annotations

import json
import zlib
from collections import OrderedDict
from dataclasses import fields
from pathlib import Path
from typing import Iterator

import numpy as np

from .config import ModelConfig
from .embed import EmbedWeights
from .errors import ConfigError, ShapeError
from .fusion import FusionWeights
from .global_block import GlobalBlockWeights
from .local_block import AttentionWeights, FFNWeights, LocalBlockWeights, LTMHRAWeights

INIT_SCHEMES = ("random", "zero-appendix-a")


def _attn_shapes(C: int) -> list[tuple[str, tuple[int, ...]]]:
    out = [("ln_gamma", (C,)), ("ln_beta", (C,))]
    for p in "qkvo":
        out += [(f"w{p}", (C, C)), (f"b{p}", (C,))]
    return out


def _ffn_shapes(C: int) -> list[tuple[str, tuple[int, ...]]]:
    return [
        ("ln_gamma", (C,)), ("ln_beta", (C,)),
        ("w1", (C, 4 * C)), ("b1", (4 * C,)),
        ("w2", (4 * C, C)), ("b2", (C,)),
    ]


def _lt_shapes(C: int, Ci: int, t: int) -> list[tuple[str, tuple[int, ...]]]:
    return [
        ("bn_mean", (C,)), ("bn_var", (C,)), ("bn_gamma", (C,)), ("bn_beta", (C,)),
        ("down_w", (C, Ci)), ("down_b", (Ci,)),
        ("kernel", (t, Ci)),
        ("up_w", (Ci, C)), ("up_b", (C,)),
    ]


def _global_shapes(C: int, nq: int) -> list[tuple[str, tuple[int, ...]]]:
    out = [
        ("dpe_kernel", (3, 3, 3, C)), ("dpe_bias", (C,)),
        ("query", (nq, C)),
        ("ln_q_gamma", (C,)), ("ln_q_beta", (C,)),
        ("ln_x_gamma", (C,)), ("ln_x_beta", (C,)),
    ]
    for p in "qkvo":
        out += [(f"w{p}", (C, C)), (f"b{p}", (C,))]
    out += [(f"ffn.{n}", s) for n, s in _ffn_shapes(C)]
    return out


def param_manifest(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered ``(name, shape)`` list of every stored parameter."""
    C, p = cfg.width, cfg.patch_size
    _, H, W = cfg.grid
    m: list[tuple[str, tuple[int, ...]]] = [
        ("embed.conv_w", (C, 3, 3, p, p)),
        ("embed.conv_b", (C,)),
        ("embed.cls", (C,)),
        ("embed.pos", (H * W + 1, C)),
    ]
    for i in range(1, cfg.depth + 1):
        for k in range(cfg.local_count(i)):
            m += [(f"blocks.{i}.lt.{k}.{n}", s) for n, s in _lt_shapes(C, cfg.inner_width, cfg.tube)]
        m += [(f"blocks.{i}.attn.{n}", s) for n, s in _attn_shapes(C)]
        m += [(f"blocks.{i}.ffn.{n}", s) for n, s in _ffn_shapes(C)]
    for i in cfg.global_layers:
        m += [(f"global.{i}.{n}", s) for n, s in _global_shapes(C, cfg.nq)]
    if cfg.global_layers:
        m.append(("fusion.alpha_raw", (1,)))
        if cfg.fusion == "parallel":
            m.append(("fusion.proj", (len(cfg.global_layers) * C, C)))
    m += [
        ("norm.gamma", (C,)), ("norm.beta", (C,)),
        ("head.w", (C, cfg.num_classes)), ("head.b", (cfg.num_classes,)),
    ]
    return m


def _zeroed_at_init(name: str) -> bool:
    leaf = name.rsplit(".", 1)[-1]
    if ".lt." in name:
        return leaf in ("up_w", "up_b")
    if name.startswith("global."):
        return leaf in ("query", "wo", "bo") or name.endswith(("ffn.w2", "ffn.b2"))
    return name == "fusion.alpha_raw"


def _draw(name: str, shape: tuple[int, ...], seed: int) -> np.ndarray:
    # per-name stream: shared parameter names get identical values across configs
    rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
    leaf = name.rsplit(".", 1)[-1]
    if leaf == "bn_var":
        return rng.uniform(0.5, 1.5, shape)
    if leaf.endswith("gamma"):
        return 1.0 + 0.1 * rng.standard_normal(shape)
    if leaf in ("w1", "w2", "down_w", "up_w", "proj") or (leaf.startswith("w") and len(shape) == 2):
        return rng.standard_normal(shape) / np.sqrt(shape[0])
    if leaf == "conv_w":
        return rng.standard_normal(shape) / np.sqrt(np.prod(shape[1:]))
    if leaf in ("kernel", "dpe_kernel"):
        return 0.3 * rng.standard_normal(shape)
    if leaf in ("cls", "pos", "query", "alpha_raw"):
        return 0.5 * rng.standard_normal(shape)
    return 0.1 * rng.standard_normal(shape)


class ModelWeights:
    """Ordered name -> array store whose shapes match ``param_manifest(cfg)``."""

    def __init__(self, cfg: ModelConfig, params: dict[str, np.ndarray]):
        self.cfg = cfg
        expected = param_manifest(cfg)
        names = [n for n, _ in expected]
        missing = [n for n in names if n not in params]
        extra = [n for n in params if n not in set(names)]
        if missing or extra:
            raise ShapeError(f"weights do not match config: missing={missing[:5]} unexpected={extra[:5]}")
        self.params: OrderedDict[str, np.ndarray] = OrderedDict()
        for n, shape in expected:
            arr = np.asarray(params[n])
            if arr.shape != shape:
                raise ShapeError(f"parameter {n}: shape {arr.shape} != expected {shape}")
            self.params[n] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def num_params(self) -> int:
        return sum(int(np.prod(a.shape)) for a in self.params.values())

    # -- initialisation -------------------------------------------------

    @classmethod
    def init(cls, cfg: ModelConfig, seed: int = 0, scheme: str = "random") -> "ModelWeights":
        """Seeded random weights; ``zero-appendix-a`` then zeroes the inserted output layers.

        The zeroed set is: LT_MHRA up-projections, global queries, cross-attention
        output projections, the second FFN linear of every global block, and the
        fusion gate logit.
        """
        if scheme not in INIT_SCHEMES:
            raise ConfigError(f"unknown init scheme {scheme!r}")
        dtype = np.dtype(cfg.dtype)
        params = {}
        for name, shape in param_manifest(cfg):
            arr = _draw(name, shape, seed)
            if scheme == "zero-appendix-a" and _zeroed_at_init(name):
                arr = np.zeros(shape)
            params[name] = arr.astype(dtype)
        return cls(cfg, params)

    def subset(self, cfg: ModelConfig) -> "ModelWeights":
        """Weights for ``cfg`` taken by name from this store."""
        return ModelWeights(cfg, {n: self.params[n] for n, _ in param_manifest(cfg)})

    # -- structured views -----------------------------------------------

    def _build(self, klass, prefix: str, **extra):
        kw = {f.name: self.params[f"{prefix}.{f.name}"] for f in fields(klass) if f.name not in extra}
        return klass(**kw, **extra)

    def embed(self) -> EmbedWeights:
        return self._build(EmbedWeights, "embed")

    def local(self, layer: int) -> LocalBlockWeights:
        p = f"blocks.{layer}"
        lt = [self._build(LTMHRAWeights, f"{p}.lt.{k}") for k in range(self.cfg.local_count(layer))]
        return LocalBlockWeights(
            attn=self._build(AttentionWeights, f"{p}.attn"),
            ffn=self._build(FFNWeights, f"{p}.ffn"),
            lt=lt,
        )

    def global_block(self, layer: int) -> GlobalBlockWeights:
        p = f"global.{layer}"
        return self._build(GlobalBlockWeights, p, ffn=self._build(FFNWeights, f"{p}.ffn"))

    def fusion(self) -> FusionWeights:
        return FusionWeights(
            strategy=self.cfg.fusion,
            alpha_raw=float(self.params["fusion.alpha_raw"][0]),
            proj=self.params.get("fusion.proj"),
        )

    # -- serialisation --------------------------------------------------

    def manifest(self) -> list[dict]:
        return [
            {"name": n, "shape": list(a.shape), "dtype": str(a.dtype)}
            for n, a in self.params.items()
        ]

    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "manifest.json").write_text(json.dumps(self.manifest(), indent=1))
        with open(d / "params.bin", "wb") as f:
            for a in self.params.values():
                f.write(np.ascontiguousarray(a, dtype=a.dtype.newbyteorder("<")).tobytes())

    @classmethod
    def load(cls, directory: str | Path, cfg: ModelConfig) -> "ModelWeights":
        d = Path(directory)
        try:
            manifest = json.loads((d / "manifest.json").read_text())
            raw = (d / "params.bin").read_bytes()
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read weight store {d}: {e}") from e
        params = {}
        offset = 0
        for entry in manifest:
            dt = np.dtype(entry["dtype"]).newbyteorder("<")
            shape = tuple(entry["shape"])
            n = int(np.prod(shape)) if shape else 1
            nbytes = n * dt.itemsize
            if offset + nbytes > len(raw):
                raise ShapeError(f"params.bin truncated at {entry['name']}")
            params[entry["name"]] = np.frombuffer(raw, dtype=dt, count=n, offset=offset).reshape(shape).astype(dt.newbyteorder("="))
            offset += nbytes
        if offset != len(raw):
            raise ShapeError(f"params.bin has {len(raw) - offset} trailing bytes")
        return cls(cfg, params)
