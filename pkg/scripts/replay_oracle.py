"""Run the CLI forward pass and replay the same model with the scalar-loop oracle.

    python3 scripts/replay_oracle.py --config tiny --seed 1 --synthetic 3

Prints the maximum relative logit difference and exits non-zero if it
exceeds --tolerance.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from contextlib import redirect_stdout

import numpy as np

from uf2 import cli, rng
from uf2.config import ModelConfig
from uf2.model import expected_video_shape
from uf2.reference import ref_forward
from uf2.weights import ModelWeights


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", default="tiny")
    ap.add_argument("--seed", type=int, default=1, help="random:<seed> weight init")
    ap.add_argument("--synthetic", type=int, default=0, help="clip seed")
    ap.add_argument("--tolerance", type=float, default=1e-10)
    args = ap.parse_args(argv)

    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli.main(["forward", "--config", args.config, "--init", f"random:{args.seed}",
                         "--synthetic", str(args.synthetic)])
    if code:
        return code
    cli_logits = np.array(json.loads(buf.getvalue())["logits"])

    cfg = ModelConfig.load(args.config)
    weights = ModelWeights.init(cfg, args.seed)
    video = rng.uniform(args.synthetic, expected_video_shape(cfg))
    ref = ref_forward(video, cfg, weights)

    err = float(np.abs(cli_logits - ref).max() / max(np.abs(ref).max(), 1e-300))
    print(json.dumps({"config": args.config, "classes": len(ref), "max_rel_diff": err}))
    return 0 if err <= args.tolerance else 1


if __name__ == "__main__":
    sys.exit(main())
