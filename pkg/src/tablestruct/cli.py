"""Command line interface: generate-data, train, infer, eval.

Exit codes: 0 ok, 1 input error, 2 internal error/abort.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import GridInconsistencyError, InvalidInputError, TrainingAbortError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tablestruct")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-data", help="write a synthetic dataset directory")
    g.add_argument("--count", type=int, required=True, help="training samples")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--curve-prob", type=float, default=0.3)
    g.add_argument("--borderless-prob", type=float, default=0.4)
    g.add_argument("--val-count", type=int, default=0)
    g.add_argument("--test-count", type=int, default=0)

    t = sub.add_parser("train", help="staged training from a TOML config")
    t.add_argument("--config", required=True)

    i = sub.add_parser("infer", help="recognize one table image")
    i.add_argument("--image", required=True)
    i.add_argument("--ckpt", required=True)
    i.add_argument("--out", required=True)
    i.add_argument("--overlay", default=None)
    i.add_argument("--resize-mode", choices=["longer", "both", "shorter"], default=None)

    e = sub.add_parser("eval", help="evaluate result JSONs against ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--iou", type=float, default=0.6)
    e.add_argument("--ignore-empty", action="store_true")
    e.add_argument("--out", default=None, help="write the report JSON here")
    return parser


def _cmd_generate(args) -> int:
    from .synthdata import generate_dataset

    manifest = generate_dataset(
        args.out, args.count, seed=args.seed, curve_prob=args.curve_prob,
        borderless_prob=args.borderless_prob, val_count=args.val_count,
        test_count=args.test_count)
    print(f"wrote {sum(len(v) for v in manifest.values())} samples to {args.out}")
    return 0


def _cmd_train(args) -> int:
    from .config import load_config
    from .train import train_staged

    cfg = load_config(args.config)
    final = train_staged(cfg)
    print(f"final checkpoint: {final}")
    return 0


def _cmd_infer(args) -> int:
    import numpy as np

    from . import infer as inf
    from .train import load_checkpoint

    model, cfg, _ = load_checkpoint(args.ckpt)
    if args.resize_mode:
        cfg.resize_mode = args.resize_mode
    image = inf.load_image(args.image)
    try:
        result = inf.run_inference(model, image, cfg)
    except GridInconsistencyError as exc:
        inf.save_result(inf.error_result(exc, image.shape[:2]), args.out)
        print(f"grid inconsistency; raw separators written to {args.out}", file=sys.stderr)
        return 2
    inf.save_result(result, args.out)
    if args.overlay:
        cells = inf.result_cells(result)
        inf.render_overlay(image, cells).save(args.overlay)
    print(f"{len(result['cells'])} cells -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    from .evaluate import evaluate_dirs, format_report

    report = evaluate_dirs(args.pred, args.gt, iou=args.iou, ignore_empty=args.ignore_empty)
    print(format_report(report))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(report, f, indent=1)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "generate-data": _cmd_generate,
        "train": _cmd_train,
        "infer": _cmd_infer,
        "eval": _cmd_eval,
    }
    try:
        return handlers[args.command](args)
    except (InvalidInputError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except (TrainingAbortError, GridInconsistencyError) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
