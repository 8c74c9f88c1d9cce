"""Plane-sweep error as orientation noise N0 grows.

    python scripts/noise_degradation.py --scenes 20 --levels 0,0.001,0.003,0.01
"""
import argparse

import numpy as np

from depthmotion.config import ExperimentConfig
from depthmotion.experiments import run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenes", type=int, default=20)
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--frames", type=int, default=6)
    ap.add_argument("--seed", type=int, default=31)
    ap.add_argument("--planes", type=int, default=1)
    ap.add_argument("--levels", default="0,0.001,0.01")
    args = ap.parse_args()

    for n0 in (float(v) for v in args.levels.split(",")):
        cfg = ExperimentConfig(seed=args.seed, scenes=args.scenes, noise_n0=n0)
        cfg.camera.width = cfg.camera.height = args.size
        cfg.trajectory.frame_count = args.frames
        cfg.estimator.name = "plane-sweep"
        rows = run_sweep(cfg.validate(), [args.planes], ["plane-sweep"])
        err = np.array([r.norm_err for r in rows])
        print(f"N0={n0:<8g} mean={err.mean():.4f} median={np.median(err):.4f}")


if __name__ == "__main__":
    main()
