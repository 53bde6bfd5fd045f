"""Video-to-token projection and the TokenGrid value type."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ModelConfig
from .errors import ConfigError, ShapeError
from .tensor import Tensor


@dataclass(frozen=True)
class TokenGrid:
    """Patch tokens on a ``(T, H, W)`` grid plus one class token per frame."""

    patch_tokens: Tensor  # T x H x W x C
    class_tokens: Tensor  # T x C

    def __post_init__(self):
        p, c = self.patch_tokens, self.class_tokens
        if p.ndim != 4 or c.ndim != 2 or c.shape != (p.shape[0], p.shape[3]) or min(p.shape) < 1:
            raise ShapeError(f"TokenGrid: inconsistent shapes patch={p.shape} class={c.shape}")

    @property
    def grid(self) -> tuple[int, int, int]:
        return tuple(self.patch_tokens.shape[:3])

    @property
    def width(self) -> int:
        return self.patch_tokens.shape[3]

    @property
    def num_tokens(self) -> int:
        T, H, W = self.grid
        return T * H * W

    def frames(self) -> Tensor:
        """``T x (1 + H*W) x C`` with each frame's class token first."""
        T, H, W = self.grid
        flat = self.patch_tokens.reshape(T, H * W, self.width)
        return np.concatenate([self.class_tokens[:, None, :], flat], axis=1)

    @classmethod
    def from_frames(cls, frames: Tensor, grid: tuple[int, int, int]) -> "TokenGrid":
        T, H, W = grid
        if frames.shape[:2] != (T, H * W + 1):
            raise ShapeError(f"from_frames: {frames.shape} does not match grid {grid}")
        return cls(frames[:, 1:, :].reshape(T, H, W, frames.shape[2]), frames[:, 0, :])

    def flat_patches(self) -> Tensor:
        """All patch tokens as an ``L x C`` matrix in (t, h, w) order."""
        return self.patch_tokens.reshape(-1, self.width)


@dataclass
class EmbedWeights:
    conv_w: Tensor  # C x 3 x 3 x p x p  (out, in, t, h, w)
    conv_b: Tensor  # C
    cls: Tensor  # C
    pos: Tensor  # (H*W + 1) x C, class position first


def patch_embed(video: Tensor, w: EmbedWeights, cfg: ModelConfig) -> TokenGrid:
    """Dense 3D patch convolution, then class token and spatial position embedding.

    The temporal kernel is 3 with padding 1; the temporal stride is 2 when
    ``cfg.temporal_downsample`` is set.
    """
    video = np.asarray(video)
    if video.ndim != 4 or video.shape[0] != 3:
        raise ShapeError(f"patch_embed: expected video of shape 3 x T x H x W, got {video.shape}")
    _, Tin, Hin, Win = video.shape
    p = cfg.patch_size
    if Hin % p or Win % p:
        raise ConfigError(f"patch_embed: spatial size {Hin}x{Win} not divisible by {p}")
    st = cfg.stride_t
    if st == 2 and Tin % 2:
        raise ConfigError(f"patch_embed: temporal downsampling needs even frames, got {Tin}")
    C = w.conv_b.shape[0]
    kt = w.conv_w.shape[2]
    if w.conv_w.shape != (C, 3, kt, p, p):
        raise ShapeError(f"patch_embed: conv weight {w.conv_w.shape} does not match patch {p}")
    H, W = Hin // p, Win // p
    pad = kt // 2
    T = (Tin + 2 * pad - kt) // st + 1

    padded = np.pad(video, ((0, 0), (pad, pad), (0, 0), (0, 0)))
    # frame index for each (output step, tap)
    idx = np.arange(T)[:, None] * st + np.arange(kt)[None, :]
    clips = padded[:, idx]  # 3 x T x kt x Hin x Win
    clips = clips.reshape(3, T, kt, H, p, W, p)
    # c T a H i W j , o c a i j -> T H W o
    patches = np.einsum("cTaHiWj,ocaij->THWo", clips, w.conv_w, optimize=True)
    patches = patches + w.conv_b
    if w.pos.shape != (H * W + 1, C):
        raise ShapeError(f"patch_embed: positional embedding {w.pos.shape} != {(H * W + 1, C)}")
    patches = patches + w.pos[1:].reshape(H, W, C)
    cls = np.broadcast_to(w.cls + w.pos[0], (T, C)).copy()
    return TokenGrid(patches, cls)

