"""Multi-shift depth pipeline.

Each step buffers the newest frame and speed samples, clusters the previous
fused depth map, picks one past frame per cluster so that the cluster lands
near ``beta_mean`` of the estimator's range, runs the estimator on every
pair and fuses the results pixel-wise.
"""
from __future__ import annotations

import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, ContractViolation, NotReadyError, OrderingError, PartialCoverageError
from .estimators import Estimator, EstimatorCalibration, NormalizedDepthMap
from .kmeans import MAX_SAMPLES, kmeans_depth
from .stillbox import Frame

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpeedSample:
    velocity: np.ndarray
    timestamp: float

    def __post_init__(self):
        v = np.array(self.velocity, dtype=np.float64).reshape(3)
        v.flags.writeable = False
        object.__setattr__(self, "velocity", v)


@dataclass(frozen=True)
class FusionParams:
    beta_min: float = 0.1
    beta_mean: float = 0.4
    beta_max: float = 0.9
    epsilon: float = 1e-3

    def __post_init__(self):
        if not 0 <= self.beta_min < self.beta_mean < self.beta_max <= 1:
            raise ConfigError("need 0 <= beta_min < beta_mean < beta_max <= 1")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")

    def for_calibration(self, calib: EstimatorCalibration) -> "FusionParams":
        """Raise ``beta_min`` to the estimator's saturation floor.

        A clamped estimator reports everything nearer than its range at the
        floor value; those outputs must not earn weight above ``epsilon``.
        """
        floor = calib.beta_bounds[0]
        if self.beta_min < floor < self.beta_mean:
            return replace(self, beta_min=floor)
        return self


@dataclass(frozen=True)
class DepthMap:
    values: np.ndarray
    timestamp: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(v)) or not np.all(v > 0):
            raise ContractViolation("depth values must be positive and finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class PlannedPlane:
    centroid: float
    desired_displacement: float
    shift: int
    achieved_displacement: float


@dataclass(frozen=True)
class ShiftPlan:
    planes: tuple[PlannedPlane, ...]

    def to_dict(self) -> list[dict]:
        return [p.__dict__.copy() for p in self.planes]


# ---------------------------------------------------------------- buffers


class RingBuffers:
    """Bounded FIFOs of frames and speed samples with increasing timestamps."""

    def __init__(self, frame_capacity: int = 64, speed_capacity: int = 1024):
        if frame_capacity < 2 or speed_capacity < 2:
            raise ConfigError("buffer capacities must be >= 2")
        self.frames: deque[Frame] = deque(maxlen=frame_capacity)
        self.speeds: deque[SpeedSample] = deque(maxlen=speed_capacity)

    def push_frame(self, frame: Frame) -> "RingBuffers":
        if self.frames and frame.timestamp <= self.frames[-1].timestamp:
            raise OrderingError(f"frame timestamp {frame.timestamp} not after {self.frames[-1].timestamp}")
        self.frames.append(frame)
        return self

    def push_speed(self, sample: SpeedSample) -> "RingBuffers":
        if self.speeds and sample.timestamp <= self.speeds[-1].timestamp:
            raise OrderingError(f"speed timestamp {sample.timestamp} not after {self.speeds[-1].timestamp}")
        self.speeds.append(sample)
        return self

    def speed_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        ts = np.array([s.timestamp for s in self.speeds], dtype=np.float64)
        vs = np.array([s.velocity for s in self.speeds], dtype=np.float64).reshape(-1, 3)
        return ts, vs

    def covers(self, t0: float, t1: float) -> bool:
        if len(self.speeds) < 2:
            return False
        ts = [self.speeds[0].timestamp, self.speeds[1].timestamp, self.speeds[-2].timestamp, self.speeds[-1].timestamp]
        tol_lo = ts[1] - ts[0]
        tol_hi = ts[3] - ts[2]
        return t0 >= ts[0] - tol_lo - 1e-12 and t1 <= ts[3] + tol_hi + 1e-12


# ---------------------------------------------------------------- integration


def _interp(t: float, ts: np.ndarray, vs: np.ndarray) -> np.ndarray:
    """Linear interpolation, extrapolating from the end segments."""
    i = int(np.clip(np.searchsorted(ts, t) - 1, 0, ts.size - 2))
    w = (t - ts[i]) / (ts[i + 1] - ts[i])
    return vs[i] + w * (vs[i + 1] - vs[i])


def integrate_displacement_vector(buffers: RingBuffers, t: float, dt: float) -> np.ndarray:
    """Trapezoidal integral of the buffered velocity over ``[t - dt, t]``."""
    if dt < 0:
        raise ContractViolation("dt must be non-negative")
    t0 = t - dt
    if not buffers.covers(t0, t):
        raise PartialCoverageError(f"speed samples do not cover [{t0}, {t}]")
    if dt == 0:
        return np.zeros(3)
    ts, vs = buffers.speed_arrays()
    inside = (ts > t0) & (ts < t)
    grid = np.concatenate([[t0], ts[inside], [t]])
    vals = np.vstack([_interp(t0, ts, vs), vs[inside], _interp(t, ts, vs)])
    return np.trapezoid(vals, grid, axis=0)


def integrate_displacement(buffers: RingBuffers, t: float, dt: float) -> float:
    """Norm of the integrated velocity (not the path length)."""
    return float(np.linalg.norm(integrate_displacement_vector(buffers, t, dt)))


def _frame_index(buffers: RingBuffers, t: float) -> int:
    times = [f.timestamp for f in buffers.frames]
    idx = int(np.searchsorted(times, t, side="right")) - 1
    if idx < 0:
        raise NotReadyError(f"no buffered frame at or before t={t}")
    return idx


def pick_pair(buffers: RingBuffers, t: float, target_displacement: float) -> tuple[int, float]:
    """Frame shift whose integrated displacement is closest to the target.

    Ties go to the smaller shift. Shifts reaching beyond the speed history
    are skipped.
    """
    if len(buffers.frames) < 2:
        raise NotReadyError("need at least two buffered frames")
    idx = _frame_index(buffers, t)
    t_cur = buffers.frames[idx].timestamp
    best = None
    for shift in range(1, idx + 1):
        dt = t_cur - buffers.frames[idx - shift].timestamp
        try:
            d = integrate_displacement(buffers, t_cur, dt)
        except PartialCoverageError:
            break
        err = abs(d - target_displacement)
        if best is None or err < best[0]:
            best = (err, shift, d)
    if best is None:
        if idx == 0:
            raise NotReadyError("no older frame before t")
        raise PartialCoverageError("speed samples do not cover any frame pair")
    return best[1], best[2]


# ---------------------------------------------------------------- planning


def plan_shifts(
    prev_depth: DepthMap | None,
    n: int,
    calib: EstimatorCalibration,
    fusion: FusionParams,
    buffers: RingBuffers,
    t: float,
    seed: int = 0,
    kmeans_samples: int | None = MAX_SAMPLES,
) -> ShiftPlan:
    """One plane per depth cluster, each targeting ``beta_mean``.

    Without a previous depth map a single plane is planned at half the
    estimator's maximum distance.
    """
    if prev_depth is None:
        centroids = [calib.max_distance / 2]
    else:
        centroids = kmeans_depth(prev_depth, n, seed=seed, max_samples=kmeans_samples)
    planes = []
    for c in centroids:
        desired = c / (calib.alpha * fusion.beta_mean)
        shift, achieved = pick_pair(buffers, t, desired)
        planes.append(PlannedPlane(float(c), float(desired), int(shift), float(achieved)))
    return ShiftPlan(tuple(planes))


# ---------------------------------------------------------------- fusion


def fusion_weight(beta, p: FusionParams):
    """Piecewise-linear tent peaking at ``beta_mean``, plus ``epsilon``."""
    x = np.asarray(beta, dtype=np.float64)
    rising = (x - p.beta_min) / (p.beta_mean - p.beta_min)
    falling = (p.beta_max - x) / (p.beta_max - p.beta_mean)
    f = np.select(
        [x < p.beta_min, x < p.beta_mean, x < p.beta_max],
        [0.0, rising, falling],
        default=0.0,
    )
    w = p.epsilon + f
    return float(w) if np.ndim(w) == 0 else w


def fuse(maps: list[NormalizedDepthMap], calib: EstimatorCalibration, p: FusionParams, timestamp: float = 0.0) -> DepthMap:
    if not maps:
        raise ContractViolation("fusion needs at least one map")
    shape = maps[0].values.shape
    if any(m.values.shape != shape for m in maps):
        raise ContractViolation("all maps must share dimensions")
    p = p.for_calibration(calib)
    num = np.zeros(shape)
    den = np.zeros(shape)
    for m in maps:
        w = fusion_weight(m.values, p)
        num += w * m.metric(calib)
        den += w
    return DepthMap(num / den, timestamp)


# ---------------------------------------------------------------- loop


@dataclass(frozen=True)
class PipelineConfig:
    n_planes: int = 1
    fusion: FusionParams = FusionParams()
    frame_capacity: int = 64
    speed_capacity: int = 1024
    kmeans_samples: int | None = MAX_SAMPLES
    seed: int = 0
    parallel: bool = False

    def __post_init__(self):
        if not 1 <= self.n_planes <= 4:
            raise ConfigError(f"n_planes must be in [1, 4], got {self.n_planes}")


@dataclass
class StepResult:
    depth: DepthMap
    plan: ShiftPlan
    maps: list[NormalizedDepthMap] = field(default_factory=list)


class DepthPipeline:
    """Single-writer state machine around the buffers and previous depth."""

    def __init__(self, estimator: Estimator, config: PipelineConfig | None = None):
        self.estimator = estimator
        self.config = config or PipelineConfig()
        self.buffers = RingBuffers(self.config.frame_capacity, self.config.speed_capacity)
        self.prev_depth: DepthMap | None = None
        self.steps = 0

    @property
    def calibration(self) -> EstimatorCalibration:
        return self.estimator.calibration

    def step(self, frame: Frame, speeds=()) -> StepResult | None:
        """Advance by one frame. Returns None while warming up."""
        for s in speeds:
            self.buffers.push_speed(s)
        self.buffers.push_frame(frame)
        if len(self.buffers.frames) < 2:
            return None

        cfg = self.config
        t = frame.timestamp
        plan = plan_shifts(
            self.prev_depth, cfg.n_planes, self.calibration, cfg.fusion, self.buffers, t,
            seed=cfg.seed + self.steps, kmeans_samples=cfg.kmeans_samples,
        )
        if all(p.achieved_displacement == 0 for p in plan.planes):
            log.debug("no motion at t=%s; skipping", t)
            return None

        frames = self.buffers.frames
        idx = len(frames) - 1
        jobs = [
            (frames[idx - p.shift], integrate_displacement_vector(self.buffers, t, t - frames[idx - p.shift].timestamp))
            for p in plan.planes
        ]

        def run(job):
            previous, disp = job
            return self.estimator.estimate(frame, previous, disp)

        if cfg.parallel and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
                maps = list(pool.map(run, jobs))
        else:
            maps = [run(j) for j in jobs]
        maps = [m for m in maps if m.displacement > 0] or maps

        fused = fuse(maps, self.calibration, cfg.fusion, timestamp=t)
        self.prev_depth = fused
        self.steps += 1
        return StepResult(fused, plan, maps)
