"""Dataset generation, pipeline runs and plane-count sweeps."""
from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from dataclasses import replace as dataclass_replace
from pathlib import Path

import numpy as np

from . import io
from .config import ExperimentConfig
from .errors import DepthMotionError
from .estimators import make_estimator
from .metrics import l1_error, normalized_abs_error, rmse
from .pipeline import DepthPipeline, PipelineConfig, SpeedSample
from .stillbox import (
    Frame,
    OrientationNoise,
    Scene,
    Trajectory,
    generate_scene,
    render_sequence,
    sample_trajectory,
)

log = logging.getLogger(__name__)

METRIC_FIELDS = ["scene_id", "step", "n_planes", "estimator", "l1", "rmse", "norm_err"]
TIMING_FIELDS = ["scene_id", "step", "n_planes", "estimator", "runtime_ms"]
SWEEP_FIELDS = ["estimator", "n_planes", "scene_id", "l1", "rmse", "norm_err", "n_eval_pixels"]


class OutputError(DepthMotionError):
    category = "io"


def scene_seed(base_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1, np.uint64)[0])


def scene_id(index: int) -> str:
    return f"scene_{index:03d}"


@dataclass(frozen=True)
class SceneSetup:
    index: int
    seed: int
    scene: Scene
    trajectory: Trajectory
    noise: OrientationNoise | None


def setup_scene(cfg: ExperimentConfig, index: int) -> SceneSetup:
    seed = scene_seed(cfg.seed, index)
    scene = generate_scene(seed, cfg.scene.params(cfg.camera.fov_deg))
    t = cfg.trajectory
    traj = sample_trajectory(seed, t.speed, t.frame_period, t.frame_count)
    noise = OrientationNoise(cfg.noise_n0, seed) if cfg.noise_n0 > 0 else None
    return SceneSetup(index, seed, scene, traj, noise)


def render_setup(cfg: ExperimentConfig, setup: SceneSetup) -> list[Frame]:
    return render_sequence(setup.scene, setup.trajectory, cfg.camera.intrinsics(), setup.noise)


def speed_samples(trajectory: Trajectory, rate_hz: float, frame_count: int | None = None) -> list[list[SpeedSample]]:
    """Constant-velocity sensor readings grouped by the frame they precede.

    Group ``k`` holds the samples with timestamps in ``(t_{k-1}, t_k]``.
    """
    frame_count = frame_count or trajectory.frame_count
    v = trajectory.velocity
    groups: list[list[SpeedSample]] = [[] for _ in range(frame_count)]
    t_end = trajectory.timestamp(frame_count - 1)
    n = int(np.floor(t_end * rate_hz + 1e-9)) + 1
    k = 0
    for i in range(n):
        ts = i / rate_hz
        while k < frame_count - 1 and ts > trajectory.timestamp(k) + 1e-12:
            k += 1
        groups[k].append(SpeedSample(v, ts))
    return groups


@dataclass
class StepRecord:
    step: int
    timestamp: float
    depth: np.ndarray
    plan: list[dict]
    beta_stats: list[dict]
    runtime_ms: float
    l1: float
    rmse: float
    norm_err: float
    n_eval_pixels: int


def run_pipeline(
    frames: list[Frame],
    trajectory: Trajectory,
    estimator,
    pipe_cfg: PipelineConfig,
    speed_rate_hz: float = 100.0,
    eval_max_depth: float | None = 100.0,
) -> list[StepRecord]:
    pipeline = DepthPipeline(estimator, pipe_cfg)
    groups = speed_samples(trajectory, speed_rate_hz, len(frames))
    fusion = pipe_cfg.fusion
    records = []
    for k, (frame, speeds) in enumerate(zip(frames, groups)):
        start = time.perf_counter()
        result = pipeline.step(frame, speeds)
        elapsed = (time.perf_counter() - start) * 1000
        if result is None:
            continue
        gt = frame.gt_depth
        pred = result.depth.values
        mask = gt <= eval_max_depth if eval_max_depth is not None else np.ones(gt.shape, bool)
        stats = []
        for plane, m in zip(result.plan.planes, result.maps):
            b = m.values
            stats.append(
                {
                    "shift": plane.shift,
                    "mean": float(b.mean()),
                    "median": float(np.median(b)),
                    "in_range": float(np.mean((b >= fusion.beta_min) & (b < fusion.beta_max))),
                }
            )
        records.append(
            StepRecord(
                step=k,
                timestamp=frame.timestamp,
                depth=pred,
                plan=result.plan.to_dict(),
                beta_stats=stats,
                runtime_ms=elapsed,
                l1=l1_error(pred, gt),
                rmse=rmse(pred, gt),
                norm_err=normalized_abs_error(pred, gt, eval_max_depth),
                n_eval_pixels=int(mask.sum()),
            )
        )
    return records


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------- generate


def cmd_generate(cfg: ExperimentConfig, out: str | Path | None = None) -> Path:
    cfg.validate()
    root = Path(out or cfg.output)
    intrinsics = cfg.camera.intrinsics()
    entries = []
    try:
        root.mkdir(parents=True, exist_ok=True)
        for i in range(cfg.scenes):
            setup = setup_scene(cfg, i)
            d = root / scene_id(i)
            d.mkdir(exist_ok=True)
            for k, frame in enumerate(render_setup(cfg, setup)):
                io.save_frame(d, k, frame, intrinsics)
            io.write_json(
                d / "scene.json",
                {
                    "seed": setup.seed,
                    "params": cfg.scene.__dict__,
                    "trajectory": setup.trajectory.to_dict(),
                    "noise_n0": cfg.noise_n0,
                    "scene": setup.scene.to_dict(),
                },
            )
            entries.append({"id": scene_id(i), "seed": setup.seed, "frames": setup.trajectory.frame_count})
        io.write_json(root / "manifest.json", {"base_seed": cfg.seed, "scenes": entries})
        cfg.save(root / "config.json")
    except OSError as e:
        raise OutputError(f"{e.filename or root}: {e.strerror or e}") from e
    return root


def load_scene_frames(dataset: Path, sid: str) -> tuple[list[Frame], Trajectory]:
    d = Path(dataset) / sid
    meta = io.read_json(d / "scene.json")
    traj = Trajectory.from_dict(meta["trajectory"])
    frames = [io.load_frame(d, k)[0] for k in range(traj.frame_count)]
    return frames, traj


# ---------------------------------------------------------------- run


def _run_scene(args) -> tuple[int, list[StepRecord]]:
    cfg, index, dataset = args
    if dataset is not None:
        frames, traj = load_scene_frames(Path(dataset), scene_id(index))
    else:
        setup = setup_scene(cfg, index)
        frames, traj = render_setup(cfg, setup), setup.trajectory
    est = make_estimator(
        cfg.estimator.name, cfg.estimator.calibration(), cfg.camera.intrinsics(), cfg.estimator.sweep()
    )
    records = run_pipeline(
        frames, traj, est, cfg.pipeline.pipeline(cfg.seed), cfg.pipeline.speed_rate_hz, cfg.eval_max_depth
    )
    return index, records


def _map(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def cmd_run(cfg: ExperimentConfig, dataset: str | Path | None = None) -> Path:
    """Run the pipeline on every scene; write metrics, timings, traces and depths."""
    cfg.validate()
    out = Path(cfg.output)
    jobs = [(cfg, i, dataset) for i in range(cfg.scenes)]
    results = sorted(_map(_run_scene, jobs, cfg.workers), key=lambda r: r[0])
    try:
        out.mkdir(parents=True, exist_ok=True)
        cfg.save(out / "config.json")
        name, n = cfg.estimator.name, cfg.pipeline.planes
        with open(out / "metrics.csv", "w", newline="") as fm, open(out / "timing.csv", "w", newline="") as ft, open(
            out / "trace.jsonl", "w"
        ) as ftr:
            wm, wt = csv.writer(fm), csv.writer(ft)
            wm.writerow(METRIC_FIELDS)
            wt.writerow(TIMING_FIELDS)
            for index, records in results:
                sid = scene_id(index)
                depth_dir = out / "depth" / sid
                if cfg.save_depth or cfg.save_visualization:
                    depth_dir.mkdir(parents=True, exist_ok=True)
                for r in records:
                    wm.writerow([sid, r.step, n, name, _fmt(r.l1), _fmt(r.rmse), _fmt(r.norm_err)])
                    wt.writerow([sid, r.step, n, name, f"{r.runtime_ms:.3f}"])
                    path = None
                    if cfg.save_depth:
                        path = depth_dir / f"{io.frame_stem(r.step)}.pfm"
                        io.write_pfm(path, r.depth)
                    if cfg.save_visualization:
                        io.write_pgm(depth_dir / f"{io.frame_stem(r.step)}_vis.pgm", io.depth_to_pgm(r.depth))
                    trace = {
                        "scene_id": sid,
                        "step": r.step,
                        "timestamp": r.timestamp,
                        "plan": r.plan,
                        "beta": r.beta_stats,
                        "depth_path": str(path.relative_to(out)) if path else None,
                    }
                    ftr.write(json.dumps(trace, sort_keys=True) + "\n")
    except OSError as e:
        raise OutputError(f"{e.filename or out}: {e.strerror or e}") from e
    return out


# ---------------------------------------------------------------- sweep


@dataclass
class SweepRow:
    estimator: str
    n_planes: int
    scene: str
    l1: float
    rmse: float
    norm_err: float
    n_eval_pixels: int
    runtime_ms: float


def _sweep_scene(args) -> list[SweepRow]:
    cfg, index, ns, estimators = args
    setup = setup_scene(cfg, index)
    frames = render_setup(cfg, setup)
    intrinsics = cfg.camera.intrinsics()
    rows = []
    for name in estimators:
        est_settings = dataclass_replace(cfg.estimator, name=name)
        est = make_estimator(name, est_settings.calibration(), intrinsics, est_settings.sweep())
        for n in ns:
            pipe_settings = dataclass_replace(cfg.pipeline, planes=n)
            records = run_pipeline(
                frames, setup.trajectory, est, pipe_settings.pipeline(cfg.seed), cfg.pipeline.speed_rate_hz, cfg.eval_max_depth
            )
            if not records:
                raise DepthMotionError(f"{scene_id(index)}: pipeline produced no depth")
            last = records[-1]
            mean_rt = float(np.mean([r.runtime_ms for r in records]))
            rows.append(SweepRow(name, n, scene_id(index), last.l1, last.rmse, last.norm_err, last.n_eval_pixels, mean_rt))
    return rows


def summarize(rows: list[SweepRow]) -> list[dict]:
    """Per (estimator, n) means; normalized error both scene-averaged and pixel-pooled."""
    out = []
    keys = sorted({(r.estimator, r.n_planes) for r in rows})
    for est, n in keys:
        sel = [r for r in rows if r.estimator == est and r.n_planes == n]
        errs = np.array([r.norm_err for r in sel])
        pix = np.array([r.n_eval_pixels for r in sel], dtype=float)
        out.append(
            {
                "estimator": est,
                "n_planes": n,
                "scenes": len(sel),
                "norm_err_scene_mean": float(np.mean(errs)),
                "norm_err_pooled": float(np.sum(errs * pix) / np.sum(pix)),
                "l1": float(np.mean([r.l1 for r in sel])),
                "rmse": float(np.mean([r.rmse for r in sel])),
                "runtime_ms": float(np.mean([r.runtime_ms for r in sel])),
            }
        )
    return out


def run_sweep(cfg: ExperimentConfig, ns: list[int], estimators: list[str]) -> list[SweepRow]:
    """Final-step errors per (estimator, n, scene), ordered deterministically."""
    cfg.validate()
    for n in ns:
        dataclass_replace(cfg.pipeline, planes=n).pipeline(cfg.seed)
    for name in estimators:
        dataclass_replace(cfg.estimator, name=name).calibration()
    jobs = [(cfg, i, tuple(ns), tuple(estimators)) for i in range(cfg.scenes)]
    rows = [r for chunk in _map(_sweep_scene, jobs, cfg.workers) for r in chunk]
    rows.sort(key=lambda r: (r.estimator, r.n_planes, r.scene))
    return rows


def cmd_sweep(cfg: ExperimentConfig, ns: list[int], estimators: list[str]) -> tuple[Path, list[dict]]:
    rows = run_sweep(cfg, ns, estimators)
    summary = summarize(rows)
    out = Path(cfg.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
        cfg.save(out / "config.json")
        io.write_json(out / "sweep.json", {"planes": list(ns), "estimators": list(estimators)})
        with open(out / "sweep.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(SWEEP_FIELDS)
            for r in rows:
                w.writerow([r.estimator, r.n_planes, r.scene, _fmt(r.l1), _fmt(r.rmse), _fmt(r.norm_err), r.n_eval_pixels])
        with open(out / "sweep_timing.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["estimator", "n_planes", "scene_id", "runtime_ms"])
            for r in rows:
                w.writerow([r.estimator, r.n_planes, r.scene, f"{r.runtime_ms:.3f}"])
        fields = ["estimator", "n_planes", "scenes", "norm_err_scene_mean", "norm_err_pooled", "l1", "rmse"]
        with open(out / "summary.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(fields)
            for s in summary:
                w.writerow([s[k] if isinstance(s[k], (str, int)) else _fmt(s[k]) for k in fields])
    except OSError as e:
        raise OutputError(f"{e.filename or out}: {e.strerror or e}") from e
    return out, summary
