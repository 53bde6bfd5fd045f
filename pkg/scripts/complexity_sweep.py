"""Sweep input resolution and frame count, and fit how the attention FLOPs scale.

Spatial self-attention should scale with the square of tokens per frame;
query cross-attention should scale linearly with the total token count.
"""

from __future__ import annotations

import argparse
import json

import numpy as np

from uf2.config import PRESETS
from uf2.cost import count_flops


def slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="uf2-b16-k400", choices=sorted(PRESETS))
    ap.add_argument("--resolutions", default="112,224,336,448")
    ap.add_argument("--frames", default="8,16,32")
    args = ap.parse_args(argv)
    base = PRESETS[args.config]

    rows = []
    for r in (int(v) for v in args.resolutions.split(",")):
        cfg = base.replace(resolution=r)
        b = count_flops(cfg).flops_breakdown
        rows.append({"resolution": r, "frame_tokens": cfg.grid[1] * cfg.grid[2] + 1, "L": cfg.num_tokens,
                     "spatial_attention": b["spatial_attention"], "cross_attention": b.get("cross_attention", 0)})
    for row in rows:
        print(json.dumps(row))
    fit = {"spatial_vs_frame_tokens": slope([r["frame_tokens"] for r in rows], [r["spatial_attention"] for r in rows])}
    if all(r["cross_attention"] for r in rows):
        fit["cross_vs_L"] = slope([r["L"] for r in rows], [r["cross_attention"] for r in rows])

    frames = [int(v) for v in args.frames.split(",")]
    spatial = [count_flops(base.replace(frames=f)).flops_breakdown["spatial_attention"] for f in frames]
    fit["spatial_vs_frames"] = slope(frames, spatial)
    print(json.dumps({"exponents": fit}))


if __name__ == "__main__":
    main()
