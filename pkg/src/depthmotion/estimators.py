"""Normalized-depth estimators for one image pair.

Every estimator returns a map of ``beta`` values in [0, 1] together with the
displacement that produced it; metric depth is ``alpha * beta * displacement``
where ``alpha = max_distance / d0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy import ndimage

from .camera import Intrinsics
from .errors import ConfigError, ContractViolation
from .stillbox import Frame


@dataclass(frozen=True)
class EstimatorCalibration:
    d0: float = 0.3
    max_distance: float = 100.0
    clamp_range: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.d0 > 0 or not self.max_distance > 0:
            raise ConfigError("d0 and max_distance must be positive")
        if self.clamp_range is not None:
            lo, hi = self.clamp_range
            if not 0 < lo < hi <= self.max_distance:
                raise ConfigError(f"invalid clamp_range {self.clamp_range} for max_distance {self.max_distance}")

    @classmethod
    def clamped(cls) -> "EstimatorCalibration":
        """Mid-range variant: 10-60 m at a 5-frame (0.5 m) training shift."""
        return cls(d0=0.5, max_distance=60.0, clamp_range=(10.0, 60.0))

    @property
    def alpha(self) -> float:
        return self.max_distance / self.d0

    @property
    def beta_bounds(self) -> tuple[float, float]:
        if self.clamp_range is None:
            return 0.0, 1.0
        lo, hi = self.clamp_range
        return lo / self.max_distance, hi / self.max_distance

    def to_dict(self) -> dict:
        return {"d0": self.d0, "max_distance": self.max_distance, "clamp_range": list(self.clamp_range) if self.clamp_range else None}


@dataclass(frozen=True)
class NormalizedDepthMap:
    values: np.ndarray
    displacement: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if np.any(~np.isfinite(v)) or v.min(initial=0.0) < 0 or v.max(initial=0.0) > 1:
            raise ContractViolation("normalized depth values must lie in [0, 1]")
        if self.displacement < 0:
            raise ContractViolation("displacement must be non-negative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def metric(self, calib: EstimatorCalibration) -> np.ndarray:
        return calib.alpha * self.values * self.displacement


@dataclass(frozen=True)
class PlaneSweepConfig:
    hypothesis_count: int = 64
    window_radius: int = 3
    min_beta: float = 0.02
    # pixels whose warp moves less than this over the whole sweep are unresolvable
    min_parallax_px: float = 1.0

    def __post_init__(self):
        if self.hypothesis_count < 2:
            raise ConfigError("hypothesis_count must be >= 2")
        if self.window_radius < 1:
            raise ConfigError("window_radius must be >= 1")
        if not 0 < self.min_beta < 1:
            raise ConfigError("min_beta must be in (0, 1)")

    @property
    def betas(self) -> np.ndarray:
        return np.linspace(self.min_beta, 1.0, self.hypothesis_count)

    @property
    def beta_step(self) -> float:
        return (1.0 - self.min_beta) / (self.hypothesis_count - 1)


def _check_pair(current: Frame, previous: Frame):
    if current.shape != previous.shape:
        raise ContractViolation(f"frame sizes differ: {current.shape} vs {previous.shape}")


def oracle_estimate(
    current: Frame, previous: Frame, displacement: float, calib: EstimatorCalibration
) -> NormalizedDepthMap:
    """Ground-truth-backed beta map, saturated to the calibration's range."""
    _check_pair(current, previous)
    if displacement < 0:
        raise ContractViolation("displacement must be non-negative")
    if displacement == 0:
        return NormalizedDepthMap(np.ones(current.shape), 0.0)
    lo, hi = calib.beta_bounds
    beta = np.clip(current.gt_depth / (calib.alpha * displacement), lo, hi)
    return NormalizedDepthMap(beta, float(displacement))


def plane_sweep_estimate(
    current: Frame,
    previous: Frame,
    translation: np.ndarray,
    intrinsics: Intrinsics,
    calib: EstimatorCalibration,
    cfg: PlaneSweepConfig | None = None,
) -> NormalizedDepthMap:
    """Translation-only plane sweep over uniformly spaced beta hypotheses.

    ``translation`` is the current camera centre minus the previous one,
    expressed in the current camera frame. Both frames are assumed to share
    the same orientation.
    """
    cfg = cfg or PlaneSweepConfig()
    _check_pair(current, previous)
    if current.shape != intrinsics.shape:
        raise ContractViolation("intrinsics do not match frame size")
    T = np.asarray(translation, dtype=np.float64).reshape(3)
    dist = float(np.linalg.norm(T))
    if dist == 0:
        raise ContractViolation("zero translation; use the no-shift convention instead")

    H, W = current.shape
    rays = intrinsics.pixel_rays()
    u0 = np.arange(W, dtype=np.float64)[None, :].repeat(H, 0)
    v0 = np.arange(H, dtype=np.float64)[:, None].repeat(W, 1)
    ref = current.image
    src = previous.image
    betas = cfg.betas
    size = 2 * cfg.window_radius + 1
    n_win = size * size

    costs = np.empty((len(betas), H, W))
    max_shift = np.zeros((H, W))
    for k, beta in enumerate(betas):
        z = calib.alpha * beta * dist
        u, v, zp = intrinsics.project(rays * z + T)
        valid = (zp > 0) & (u >= 0) & (u <= W - 1) & (v >= 0) & (v <= H - 1)
        warped = ndimage.map_coordinates(src, [np.where(valid, v, 0), np.where(valid, u, 0)], order=1, mode="nearest")
        diff = np.where(valid, np.abs(ref - warped), 1.0)
        sad = ndimage.uniform_filter(diff, size=size, mode="nearest") * n_win
        costs[k] = np.where(valid, sad, np.inf)
        shift = np.hypot(np.where(valid, u - u0, 0), np.where(valid, v - v0, 0))
        np.maximum(max_shift, shift, out=max_shift)

    # argmin over the reversed stack breaks ties toward the far end
    best = len(betas) - 1 - np.argmin(costs[::-1], axis=0)
    rows, cols = np.indices((H, W))
    c0 = costs[best, rows, cols]
    beta = betas[best].copy()

    inner = (best > 0) & (best < len(betas) - 1)
    cm = costs[np.clip(best - 1, 0, None), rows, cols]
    cp = costs[np.clip(best + 1, None, len(betas) - 1), rows, cols]
    with np.errstate(invalid="ignore", divide="ignore"):
        denom = cm - 2 * c0 + cp
        offset = 0.5 * (cm - cp) / denom
    refine = inner & np.isfinite(cm) & np.isfinite(cp) & (denom > 0)
    beta = np.where(refine, beta + np.clip(offset, -0.5, 0.5) * cfg.beta_step, beta)

    flat = np.all(costs == c0[None], axis=0)
    unresolved = ~np.isfinite(c0) | flat | (max_shift < cfg.min_parallax_px)
    beta = np.where(unresolved, 1.0, beta)
    lo, hi = calib.beta_bounds
    return NormalizedDepthMap(np.clip(beta, lo, hi), dist)


class Estimator(Protocol):
    name: str
    calibration: EstimatorCalibration

    def estimate(self, current: Frame, previous: Frame, displacement: np.ndarray) -> NormalizedDepthMap:
        """``displacement`` is the world-frame vector from the previous to the current camera centre."""
        ...


@dataclass(frozen=True)
class OracleEstimator:
    calibration: EstimatorCalibration
    name: str = "oracle"

    def estimate(self, current, previous, displacement):
        return oracle_estimate(current, previous, float(np.linalg.norm(displacement)), self.calibration)


@dataclass(frozen=True)
class PlaneSweepEstimator:
    calibration: EstimatorCalibration
    intrinsics: Intrinsics
    config: PlaneSweepConfig = PlaneSweepConfig()
    name: str = "plane-sweep"

    def estimate(self, current, previous, displacement):
        displacement = np.asarray(displacement, dtype=np.float64)
        if not np.any(displacement):
            _check_pair(current, previous)
            return NormalizedDepthMap(np.ones(current.shape), 0.0)
        translation = current.pose.to_camera(displacement)
        return plane_sweep_estimate(current, previous, translation, self.intrinsics, self.calibration, self.config)


ESTIMATOR_NAMES = ("oracle", "oracle-clamped", "plane-sweep")


def default_calibration(name: str) -> EstimatorCalibration:
    if name == "oracle-clamped":
        return EstimatorCalibration.clamped()
    if name in ("oracle", "plane-sweep"):
        return EstimatorCalibration()
    raise ConfigError(f"unknown estimator {name!r}; expected one of {ESTIMATOR_NAMES}")


def make_estimator(
    name: str,
    calibration: EstimatorCalibration | None = None,
    intrinsics: Intrinsics | None = None,
    sweep: PlaneSweepConfig | None = None,
) -> Estimator:
    calibration = calibration or default_calibration(name)
    if name in ("oracle", "oracle-clamped"):
        return OracleEstimator(calibration, name)
    if name == "plane-sweep":
        if intrinsics is None:
            raise ConfigError("plane-sweep estimator needs camera intrinsics")
        return PlaneSweepEstimator(calibration, intrinsics, sweep or PlaneSweepConfig())
    raise ConfigError(f"unknown estimator {name!r}; expected one of {ESTIMATOR_NAMES}")
