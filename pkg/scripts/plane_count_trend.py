"""Normalized error against the number of planes for the clamped oracle.

    python scripts/plane_count_trend.py --scenes 20 --size 128 --frames 28
"""
import argparse
import math

import numpy as np

from depthmotion.config import ExperimentConfig
from depthmotion.experiments import run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenes", type=int, default=20)
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--frames", type=int, default=28)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--estimator", default="oracle-clamped")
    args = ap.parse_args()

    cfg = ExperimentConfig(seed=args.seed, scenes=args.scenes)
    cfg.camera.width = cfg.camera.height = args.size
    cfg.trajectory.frame_count = args.frames
    cfg.estimator.name = args.estimator
    rows = run_sweep(cfg.validate(), [1, 2, 3, 4], [args.estimator])

    print(f"{'n':>2} {'mean':>8} {'se':>8} {'median':>8}")
    for n in (1, 2, 3, 4):
        e = np.array([r.norm_err for r in rows if r.n_planes == n])
        print(f"{n:>2} {e.mean():8.4f} {e.std(ddof=1) / math.sqrt(e.size):8.4f} {np.median(e):8.4f}")


if __name__ == "__main__":
    main()
