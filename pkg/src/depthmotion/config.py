"""Experiment configuration (JSON-serialisable dataclasses)."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .camera import Intrinsics
from .errors import ConfigError
from .estimators import ESTIMATOR_NAMES, EstimatorCalibration, PlaneSweepConfig, default_calibration
from .pipeline import FusionParams, PipelineConfig
from .stillbox import SceneParams


@dataclass
class SceneSettings:
    primitive_count: int = 20
    box_half_extent: float = 50.0
    size_min: float = 0.5
    size_max: float = 4.0
    min_distance: float = 5.0

    def params(self, fov_deg: float) -> SceneParams:
        return SceneParams(
            self.primitive_count, self.box_half_extent, (self.size_min, self.size_max), self.min_distance, fov_deg
        )


@dataclass
class TrajectorySettings:
    speed: float = 1.0
    frame_period: float = 0.1
    frame_count: int = 10


@dataclass
class CameraSettings:
    width: int = 256
    height: int = 256
    fov_deg: float = 90.0

    def intrinsics(self) -> Intrinsics:
        return Intrinsics.from_fov(self.width, self.height, self.fov_deg)


@dataclass
class EstimatorSettings:
    name: str = "oracle"
    # None means the estimator's default calibration
    d0: float | None = None
    max_distance: float | None = None
    clamp_min: float | None = None
    clamp_max: float | None = None
    hypotheses: int = 64
    window_radius: int = 3
    min_beta: float = 0.02

    def calibration(self) -> EstimatorCalibration:
        base = default_calibration(self.name)
        clamp = base.clamp_range
        if self.clamp_min is not None or self.clamp_max is not None:
            if self.clamp_min is None or self.clamp_max is None:
                raise ConfigError("clamp_min and clamp_max must be given together")
            clamp = (self.clamp_min, self.clamp_max)
        return EstimatorCalibration(
            d0=self.d0 if self.d0 is not None else base.d0,
            max_distance=self.max_distance if self.max_distance is not None else base.max_distance,
            clamp_range=clamp,
        )

    def sweep(self) -> PlaneSweepConfig:
        return PlaneSweepConfig(self.hypotheses, self.window_radius, self.min_beta)


@dataclass
class PipelineSettings:
    planes: int = 1
    beta_min: float = 0.1
    beta_mean: float = 0.4
    beta_max: float = 0.9
    epsilon: float = 1e-3
    frame_capacity: int = 64
    speed_capacity: int = 1024
    speed_rate_hz: float = 100.0
    kmeans_samples: int | None = 4096

    def fusion(self) -> FusionParams:
        return FusionParams(self.beta_min, self.beta_mean, self.beta_max, self.epsilon)

    def pipeline(self, seed: int) -> PipelineConfig:
        return PipelineConfig(
            n_planes=self.planes,
            fusion=self.fusion(),
            frame_capacity=self.frame_capacity,
            speed_capacity=self.speed_capacity,
            kmeans_samples=self.kmeans_samples,
            seed=seed,
        )


@dataclass
class ExperimentConfig:
    seed: int = 0
    scenes: int = 1
    scene: SceneSettings = field(default_factory=SceneSettings)
    trajectory: TrajectorySettings = field(default_factory=TrajectorySettings)
    camera: CameraSettings = field(default_factory=CameraSettings)
    estimator: EstimatorSettings = field(default_factory=EstimatorSettings)
    pipeline: PipelineSettings = field(default_factory=PipelineSettings)
    noise_n0: float = 0.0
    # ground truth beyond this is excluded from the normalized error
    eval_max_depth: float | None = 100.0
    output: str = "out"
    workers: int = 1
    save_depth: bool = True
    save_visualization: bool = False

    def validate(self) -> "ExperimentConfig":
        if self.scenes < 1:
            raise ConfigError("scenes must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.noise_n0 < 0:
            raise ConfigError("noise_n0 must be non-negative")
        t = self.trajectory
        if not (t.speed > 0 and t.frame_period > 0) or t.frame_count < 2:
            raise ConfigError("trajectory needs positive speed/period and >= 2 frames")
        if self.pipeline.speed_rate_hz <= 0:
            raise ConfigError("speed_rate_hz must be positive")
        if self.estimator.name not in ESTIMATOR_NAMES:
            raise ConfigError(f"unknown estimator {self.estimator.name!r}")
        # constructing the module objects runs their own invariant checks
        self.scene.params(self.camera.fov_deg).validate()
        self.camera.intrinsics()
        self.estimator.calibration()
        self.estimator.sweep()
        self.pipeline.pipeline(self.seed)
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return _build(cls, d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        return cls.from_dict(data)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def _build(cls, d: dict):
    if not isinstance(d, dict):
        raise ConfigError(f"expected an object for {cls.__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(d) - set(fields)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for name, value in d.items():
        sub = fields[name].default_factory if fields[name].default_factory is not dataclasses.MISSING else None
        if sub is not None and dataclasses.is_dataclass(sub):
            kwargs[name] = _build(sub, value)
        else:
            kwargs[name] = value
    return cls(**kwargs)
