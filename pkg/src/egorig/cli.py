"""Command-line front end: ``egorig simulate | eval | stats | concat``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, load_config
from .kinematics import (
    Degenerate6DError,
    InvalidRotationError,
    ShapeError,
    SkeletonError,
    load_skeleton,
    relative_root_arrays,
)
from .metrics import DegenerateAlignmentError, MetricsReport, PoseSequence, PoseSequencePair, evaluate, loss_suite
from .motion import (
    IncompatibleMotionError,
    InsufficientFramesError,
    MotionParseError,
    concatenate,
    joint_statistics,
    load_motion,
    save_motion,
)
from .mounts import SpringStabilityError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

NUMERICAL_ERRORS = (SpringStabilityError, DegenerateAlignmentError, InvalidRotationError, Degenerate6DError)
CONFIG_ERRORS = (
    ConfigError,
    MotionParseError,
    SkeletonError,
    IncompatibleMotionError,
    InsufficientFramesError,
    ShapeError,
)


def _skeleton(path):
    if path is None:
        from .assets import load_bundled_skeleton

        return load_bundled_skeleton()
    return load_skeleton(path)


def cmd_simulate(args) -> int:
    from .simulate import run_simulation

    cfg = load_config(args.config)
    manifest = run_simulation(cfg, out_dir=args.out, blur_samples=args.blur_samples)
    out = Path(args.out) if args.out else cfg.output_dir
    print(f"wrote {manifest.frame_count} frames x {len(manifest.sensors)} sensors to {out}")
    print(f"config_hash={manifest.config_hash}")
    return EXIT_OK


def cmd_eval(args) -> int:
    skel = _skeleton(args.skeleton)
    pred_m = load_motion(args.pred, skel)
    gt_m = load_motion(args.gt, skel)
    if len(pred_m) != len(gt_m):
        raise ShapeError(f"frame counts differ: prediction {len(pred_m)}, ground truth {len(gt_m)}")
    pair = PoseSequencePair(PoseSequence.from_motion(pred_m), PoseSequence.from_motion(gt_m))
    report = evaluate(pair)
    losses = loss_suite(
        pair,
        relative_root_arrays(pred_m.root_rotations, pred_m.root_translations),
        relative_root_arrays(gt_m.root_rotations, gt_m.root_translations),
    )
    print(report.to_text())
    print(losses.to_text())
    if args.report:
        Path(args.report).write_text(MetricsReport.csv_header() + "\n" + report.csv_row() + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_stats(args) -> int:
    skel = _skeleton(args.skeleton)
    stats = joint_statistics(load_motion(args.motion, skel))
    print(stats.to_table())
    if args.csv:
        Path(args.csv).write_text(stats.to_csv(), encoding="utf-8")
    return EXIT_OK


def cmd_concat(args) -> int:
    if len(args.inputs) < 2:
        raise ConfigError("concat needs at least two input motions")
    skel = _skeleton(args.skeleton)
    seqs = [load_motion(p, skel) for p in args.inputs]
    out = seqs[0]
    for nxt in seqs[1:]:
        out = concatenate(out, nxt, args.bridge)
    save_motion(args.out, out)
    print(f"wrote {len(out)} frames to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="egorig", description="Body-worn sensor rig simulator and pose evaluation")
    ap.add_argument("--version", action="version", version=f"egorig {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write frames, IMU streams and a manifest")
    p.add_argument("--config", required=True, help="scenario config file")
    p.add_argument("--out", help="output directory (overrides [scenario] output_dir)")
    p.add_argument("--blur-samples", type=int, default=None, help="sub-frame renders averaged per output frame")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="score a predicted motion against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--report", help="write the metrics as a CSV row")
    p.add_argument("--skeleton", help="skeleton file (default: bundled body)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="per-joint velocity / acceleration / jerk statistics")
    p.add_argument("--motion", required=True)
    p.add_argument("--csv", help="also write the table as CSV")
    p.add_argument("--skeleton", help="skeleton file (default: bundled body)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("concat", help="concatenate motions with slerp bridge frames")
    p.add_argument("--out", required=True)
    p.add_argument("--bridge", type=int, default=10, help="number of bridge frames (default 10)")
    p.add_argument("--skeleton", help="skeleton file (default: bundled body)")
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=cmd_concat)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except NUMERICAL_ERRORS as exc:
        print(f"egorig {args.command}: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except CONFIG_ERRORS as exc:
        print(f"egorig {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        name = getattr(exc, "filename", None)
        detail = f"{exc.strerror}: {name}" if name else str(exc)
        print(f"egorig {args.command}: I/O error: {detail}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
