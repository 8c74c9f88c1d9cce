"""Command-line front end: ``generate``, ``run`` and ``sweep``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .config import ExperimentConfig
from .errors import ConfigError, DepthMotionError
from .experiments import cmd_generate, cmd_run, cmd_sweep

EXIT_CODES = {"config": 2, "contract": 3, "io": 4, "ordering": 5, "coverage": 5, "not-ready": 5}


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--scenes", type=int)
    p.add_argument("--frames", type=int, help="frames per scene")
    p.add_argument("--size", type=int, help="square image size in pixels")
    p.add_argument("--noise", type=float, help="orientation noise N0 in radians")
    p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="depthmotion", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="render a Still-Box style dataset")
    _common(g)

    r = sub.add_parser("run", help="run the multi-shift pipeline and score it")
    _common(r)
    r.add_argument("--estimator", choices=["oracle", "oracle-clamped", "plane-sweep"])
    r.add_argument("--planes", type=int)
    r.add_argument("--dataset", help="read frames from a generated dataset instead of rendering")
    r.add_argument("--visualize", action="store_true", help="also write inverse-depth PGMs")

    s = sub.add_parser("sweep", help="compare estimators and plane counts")
    _common(s)
    s.add_argument("--planes", type=_int_list, default=[1, 2, 3, 4])
    s.add_argument("--estimators", type=_str_list, default=["oracle-clamped"])
    return parser


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.out is not None:
        cfg.output = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.scenes is not None:
        cfg.scenes = args.scenes
    if args.frames is not None:
        cfg.trajectory = replace(cfg.trajectory, frame_count=args.frames)
    if args.size is not None:
        cfg.camera = replace(cfg.camera, width=args.size, height=args.size)
    if args.noise is not None:
        cfg.noise_n0 = args.noise
    if args.workers is not None:
        cfg.workers = args.workers
    if getattr(args, "estimator", None):
        cfg.estimator = replace(cfg.estimator, name=args.estimator)
    if args.command == "run" and args.planes is not None:
        cfg.pipeline = replace(cfg.pipeline, planes=args.planes)
    if getattr(args, "visualize", False):
        cfg.save_visualization = True
    return cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command == "generate":
            out = cmd_generate(cfg)
            print(f"wrote {cfg.scenes} scenes to {out}")
        elif args.command == "run":
            out = cmd_run(cfg, dataset=args.dataset)
            print(f"wrote results to {out}")
        else:
            if not all(1 <= n <= 4 for n in args.planes):
                raise ConfigError(f"plane counts must be in [1, 4], got {args.planes}")
            out, summary = cmd_sweep(cfg, args.planes, args.estimators)
            print(f"{'estimator':<16}{'n':>3}{'norm_err':>12}{'pooled':>12}{'l1':>10}{'ms':>10}")
            for s in summary:
                print(
                    f"{s['estimator']:<16}{s['n_planes']:>3}{s['norm_err_scene_mean']:>12.4f}"
                    f"{s['norm_err_pooled']:>12.4f}{s['l1']:>10.3f}{s['runtime_ms']:>10.1f}"
                )
            print(f"wrote results to {out}")
    except DepthMotionError as e:
        print(f"error[{e.category}]: {e}", file=sys.stderr)
        return EXIT_CODES.get(e.category, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
