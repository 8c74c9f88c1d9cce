"""Multi-range depth from motion for a rotation-stabilised monocular camera."""

from .camera import CameraPose, Intrinsics
from .errors import (
    ConfigError,
    ContractViolation,
    DepthMotionError,
    NotReadyError,
    OrderingError,
    PartialCoverageError,
)
from .estimators import (
    EstimatorCalibration,
    NormalizedDepthMap,
    PlaneSweepConfig,
    make_estimator,
    oracle_estimate,
    plane_sweep_estimate,
)
from .kmeans import kmeans_1d, kmeans_depth
from .metrics import MultiScaleSpec, l1_error, multiscale_l1, normalized_abs_error, rmse
from .pipeline import (
    DepthMap,
    DepthPipeline,
    FusionParams,
    PipelineConfig,
    RingBuffers,
    ShiftPlan,
    SpeedSample,
    fuse,
    fusion_weight,
    integrate_displacement,
    pick_pair,
    plan_shifts,
)
from .stillbox import (
    Frame,
    OrientationNoise,
    Primitive,
    Scene,
    SceneParams,
    Trajectory,
    generate_scene,
    perturb_orientation,
    ray_depth,
    render_frame,
    render_sequence,
    sample_trajectory,
)

__version__ = "0.1.0"
