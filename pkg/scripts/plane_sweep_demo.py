"""Render one frame pair, run the plane sweep and write depth images.

    python scripts/plane_sweep_demo.py --seed 3 --out demo
"""
import argparse
from pathlib import Path

import numpy as np

from depthmotion.camera import CameraPose
from depthmotion.config import ExperimentConfig
from depthmotion.estimators import EstimatorCalibration, plane_sweep_estimate
from depthmotion.experiments import setup_scene
from depthmotion.io import depth_to_pgm, write_pfm, write_pgm
from depthmotion.stillbox import render_frame


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--beta", type=float, default=0.4, help="median normalized depth to aim for")
    ap.add_argument("--out", default="demo")
    args = ap.parse_args()

    cfg = ExperimentConfig(seed=args.seed)
    cfg.camera.width = cfg.camera.height = args.size
    K = cfg.camera.intrinsics()
    calib = EstimatorCalibration()
    s = setup_scene(cfg.validate(), 0)
    R = s.scene.camera_orientation

    cur = render_frame(s.scene, CameraPose(np.zeros(3), R), K)
    disp = float(np.median(cur.gt_depth)) / (calib.alpha * args.beta)
    step = disp * np.asarray(s.trajectory.direction)
    prev = render_frame(s.scene, CameraPose(-step, R), K)
    est = plane_sweep_estimate(cur, prev, R.T @ step, K, calib).metric(calib)

    rel = np.abs(est - cur.gt_depth) / cur.gt_depth
    print(f"displacement {disp:.4f} m, median normalized error {np.median(rel):.4f}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_pgm(out / "image.pgm", cur.image)
    write_pfm(out / "estimate.pfm", est)
    write_pgm(out / "estimate.pgm", depth_to_pgm(est))
    write_pgm(out / "gt.pgm", depth_to_pgm(cur.gt_depth))
    print(f"wrote {out}/")


if __name__ == "__main__":
    main()
