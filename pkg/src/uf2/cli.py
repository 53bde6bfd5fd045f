"""Command-line entry points.

Exit codes: 0 success, 2 I/O or configuration error, 3 numeric or shape error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import k710, rng
from .config import PRESETS, ModelConfig
from .cost import cost_report
from .errors import ConfigError, DataError, NumericError, ShapeError
from .gradcheck import TOLERANCE, run_many
from .model import expected_video_shape, forward_trace
from .video_io import read_video
from .weights import ModelWeights

log = logging.getLogger("uf2")

EXIT_OK, EXIT_IO, EXIT_NUMERIC = 0, 2, 3


def _emit(payload: str, out: str | None) -> None:
    if out:
        Path(out).write_text(payload)
    else:
        sys.stdout.write(payload)


def parse_init(text: str) -> tuple[str, int]:
    """``random:<seed>``, ``zero-appendix-a`` or ``zero-appendix-a:<seed>``."""
    scheme, _, seed = text.partition(":")
    if scheme not in ("random", "zero-appendix-a"):
        raise ConfigError(f"unknown --init {text!r}")
    if scheme == "random" and not seed:
        raise ConfigError("--init random needs a seed, e.g. random:1")
    try:
        return scheme, int(seed or 0)
    except ValueError:
        raise ConfigError(f"bad seed in --init {text!r}") from None


def parse_views(text: str) -> int:
    """``CxN`` (crops x clips) -> C*N."""
    try:
        parts = [int(p) for p in text.lower().split("x")]
    except ValueError:
        raise ConfigError(f"--views must look like 1x3, got {text!r}") from None
    if len(parts) != 2 or min(parts) < 1:
        raise ConfigError(f"--views must look like 1x3, got {text!r}")
    return parts[0] * parts[1]


def _weights(args, cfg: ModelConfig) -> ModelWeights:
    if args.weights:
        return ModelWeights.load(args.weights, cfg)
    scheme, seed = parse_init(args.init)
    return ModelWeights.init(cfg, seed, scheme)


def cmd_forward(args) -> int:
    cfg = ModelConfig.load(args.config)
    weights = _weights(args, cfg)
    if args.input:
        video = read_video(args.input)
    else:
        video = rng.uniform(args.synthetic, expected_video_shape(cfg))
    t0 = time.perf_counter()
    trace = forward_trace(video, cfg, weights)
    wall = time.perf_counter() - t0
    logits = trace.logits.astype(np.float64)
    stats = {
        "logits": logits.tolist(),
        "argmax": int(np.argmax(logits)),
        "stage_token_norms": [float(np.linalg.norm(t)) for t in trace.stage_tokens],
        "wall_time_s": wall,
        "config": cfg.to_dict(),
    }
    _emit(json.dumps(stats) + "\n", args.out)
    return EXIT_OK


def cmd_count(args) -> int:
    cfg = ModelConfig.load(args.config)
    report = cost_report(cfg, parse_views(args.views))
    _emit(json.dumps(report.to_dict(), indent=1) + "\n", args.out)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    sizes = json.loads(args.sizes) if args.sizes else None
    seeds = range(args.seed, args.seed + args.seeds)
    reports = run_many(seeds, sizes, args.tolerance)
    lines = "".join(json.dumps(r.to_dict()) + "\n" for r in reports)
    _emit(lines, args.out)
    return EXIT_OK if all(r.passed for r in reports) else 1


def cmd_k710(args) -> int:
    tables = k710.load_label_dir(args.labels)
    synonyms = json.loads(Path(args.synonyms).read_text()) if args.synonyms else {}
    records = []
    for path in (args.k400, args.k600, args.k700):
        records += k710.read_records(path)
    result = k710.merge_benchmarks(tables, records, synonyms)
    k710.write_merge(args.out, result)
    print(json.dumps({"labels": len(result.labels), "train": len(result.train)}))
    return EXIT_OK


def cmd_init_weights(args) -> int:
    cfg = ModelConfig.load(args.config)
    scheme, seed = parse_init(args.init)
    ModelWeights.init(cfg, seed, scheme).save(args.out)
    return EXIT_OK


def _add_k710_merge(sub) -> None:
    p = sub.add_parser("merge", help="merge K400/600/700 label spaces and training sets")
    p.add_argument("--k400", required=True)
    p.add_argument("--k600", required=True)
    p.add_argument("--k700", required=True)
    p.add_argument("--labels", required=True, help="directory with k400.txt, k600.txt, k700.txt")
    p.add_argument("--synonyms", help="JSON object mapping label -> canonical label")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_k710)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uf2", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forward", help="run one clip through the model")
    p.add_argument("--config", required=True, help=f"JSON file or preset ({', '.join(PRESETS)})")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--weights", help="weight store directory")
    src.add_argument("--init", help="random:<seed> | zero-appendix-a[:<seed>]")
    clip = p.add_mutually_exclusive_group(required=True)
    clip.add_argument("--input", help="raw float32 clip with .json sidecar")
    clip.add_argument("--synthetic", type=int, metavar="SEED", help="SplitMix64 uniform(-1,1) clip")
    p.add_argument("--out")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("count", help="parameter and FLOP accounting")
    p.add_argument("--config", required=True)
    p.add_argument("--views", default="1x1", help="crops x clips, e.g. 1x3")
    p.add_argument("--out")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("gradcheck", help="finite-difference checks of the hand-written gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=20, help="number of consecutive seeds")
    p.add_argument("--sizes", help='JSON overrides, e.g. {"T": 4, "C": 6}')
    p.add_argument("--tolerance", type=float, default=TOLERANCE)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("init-weights", help="write a weight store")
    p.add_argument("--config", required=True)
    p.add_argument("--init", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init_weights)

    p = sub.add_parser("k710", help="Kinetics-710 construction")
    _add_k710_merge(p.add_subparsers(dest="k710_command", required=True))
    return parser


def _run(parser: argparse.ArgumentParser, argv) -> int:
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING)
    try:
        return args.func(args)
    except (ShapeError, NumericError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DataError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


def main(argv=None) -> int:
    return _run(build_parser(), argv)


def k710_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="k710", description="Kinetics-710 construction")
    _add_k710_merge(parser.add_subparsers(dest="k710_command", required=True))
    return _run(parser, argv)


if __name__ == "__main__":
    sys.exit(main())
