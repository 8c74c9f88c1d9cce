"""Procedural Still-Box scenes and analytic rendering.

A scene is a set of textured spheres and axis-aligned boxes enclosed in a
large cube centred on the origin. The camera starts at the origin and
translates along a constant random direction, so every ray is guaranteed
to hit either a primitive or a wall.

All randomness comes from Philox streams keyed on ``(seed, stream, index)``
so that any single draw can be reproduced without replaying the others.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .camera import CameraPose, Intrinsics
from .errors import ConfigError

_MASK64 = (1 << 64) - 1
_STREAM_SCENE = 1
_STREAM_TRAJECTORY = 2
_STREAM_NOISE = 3

_EPS_T = 1e-9

TEXTURE_OCTAVES = 3


def rng_stream(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Counter-based generator for one ``(seed, stream, index)`` triple."""
    key = ((int(seed) & _MASK64) << 64) | ((stream & 0xFFFFFFFF) << 32) | (index & 0xFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class Primitive:
    kind: str  # "sphere" or "box"
    center: tuple[float, float, float]
    size: float  # radius or half-extent
    texture_id: int
    texture_scale: float = 1.0  # metres per coarsest noise cell

    def __post_init__(self):
        if self.kind not in ("sphere", "box"):
            raise ConfigError(f"unsupported primitive kind {self.kind!r}")
        if not self.size > 0:
            raise ConfigError(f"primitive size must be positive, got {self.size}")
        if not self.texture_scale > 0:
            raise ConfigError("texture_scale must be positive")

    def nearest_distance(self, point=(0.0, 0.0, 0.0)) -> float:
        """Distance from ``point`` to the primitive's surface (0 if inside)."""
        d = np.asarray(point, dtype=float) - np.asarray(self.center)
        if self.kind == "sphere":
            return max(float(np.linalg.norm(d)) - self.size, 0.0)
        outside = np.maximum(np.abs(d) - self.size, 0.0)
        return float(np.linalg.norm(outside))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "center": list(self.center),
            "size": self.size,
            "texture_id": self.texture_id,
            "texture_scale": self.texture_scale,
        }


@dataclass(frozen=True)
class SceneParams:
    primitive_count: int = 20
    box_half_extent: float = 50.0
    size_range: tuple[float, float] = (0.5, 4.0)
    # primitives keep this clearance from the origin so the camera path stays free
    min_distance: float = 5.0
    placement_fov_deg: float = 90.0
    sphere_fraction: float = 0.5

    def validate(self):
        if self.primitive_count < 1:
            raise ConfigError(f"primitive_count must be >= 1, got {self.primitive_count}")
        if not self.box_half_extent > 0:
            raise ConfigError("box_half_extent must be positive")
        lo, hi = self.size_range
        if not (0 < lo <= hi):
            raise ConfigError(f"size_range must be positive and ordered, got {self.size_range}")
        if self.min_distance < 0:
            raise ConfigError("min_distance must be non-negative")
        if self.min_distance + 2 * hi >= self.box_half_extent:
            raise ConfigError("box too small for min_distance and size_range")
        if not 0 < self.placement_fov_deg < 180:
            raise ConfigError("placement_fov_deg must be in (0, 180)")
        if not 0 <= self.sphere_fraction <= 1:
            raise ConfigError("sphere_fraction must be in [0, 1]")


@dataclass(frozen=True)
class Scene:
    primitives: tuple[Primitive, ...]
    box_half_extent: float
    seed: int
    camera_orientation: np.ndarray = field(default_factory=lambda: np.eye(3))
    wall_texture_id: int = 0

    def __post_init__(self):
        if not self.box_half_extent > 0:
            raise ConfigError("box_half_extent must be positive")
        r = np.array(self.camera_orientation, dtype=float)
        r.flags.writeable = False
        object.__setattr__(self, "camera_orientation", r)
        object.__setattr__(self, "primitives", tuple(self.primitives))
        # packed arrays for vectorised tracing
        spheres = [p for p in self.primitives if p.kind == "sphere"]
        boxes = [p for p in self.primitives if p.kind == "box"]
        object.__setattr__(self, "_sphere_idx", np.array([i for i, p in enumerate(self.primitives) if p.kind == "sphere"], dtype=int))
        object.__setattr__(self, "_box_idx", np.array([i for i, p in enumerate(self.primitives) if p.kind == "box"], dtype=int))
        object.__setattr__(self, "_sphere_c", np.array([p.center for p in spheres], dtype=float).reshape(-1, 3))
        object.__setattr__(self, "_sphere_r", np.array([p.size for p in spheres], dtype=float))
        object.__setattr__(self, "_box_c", np.array([p.center for p in boxes], dtype=float).reshape(-1, 3))
        object.__setattr__(self, "_box_h", np.array([p.size for p in boxes], dtype=float))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "box_half_extent": self.box_half_extent,
            "camera_orientation": self.camera_orientation.tolist(),
            "wall_texture_id": self.wall_texture_id,
            "primitives": [p.to_dict() for p in self.primitives],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        prims = [
            Primitive(p["kind"], tuple(p["center"]), p["size"], p["texture_id"], p["texture_scale"])
            for p in d["primitives"]
        ]
        return cls(prims, d["box_half_extent"], d["seed"], np.array(d["camera_orientation"]), d["wall_texture_id"])


@dataclass(frozen=True)
class Trajectory:
    direction: tuple[float, float, float]
    speed: float
    frame_period: float
    frame_count: int

    def __post_init__(self):
        if abs(np.linalg.norm(self.direction) - 1) > 1e-9:
            raise ConfigError("trajectory direction must be a unit vector")
        if not self.speed > 0 or not self.frame_period > 0:
            raise ConfigError("speed and frame_period must be positive")
        if self.frame_count < 2:
            raise ConfigError("frame_count must be >= 2")

    @property
    def velocity(self) -> np.ndarray:
        return np.asarray(self.direction) * self.speed

    def timestamp(self, k: int) -> float:
        return k * self.frame_period

    def position(self, k: int) -> np.ndarray:
        return self.velocity * self.timestamp(k)

    def to_dict(self) -> dict:
        return {
            "direction": list(self.direction),
            "speed": self.speed,
            "frame_period": self.frame_period,
            "frame_count": self.frame_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        return cls(tuple(d["direction"]), d["speed"], d["frame_period"], d["frame_count"])


@dataclass(frozen=True)
class OrientationNoise:
    n0: float
    rng_seed: int

    def __post_init__(self):
        if self.n0 < 0:
            raise ConfigError(f"n0 must be non-negative, got {self.n0}")


@dataclass(frozen=True)
class Frame:
    image: np.ndarray
    gt_depth: np.ndarray
    timestamp: float
    pose: CameraPose

    def __post_init__(self):
        img = np.asarray(self.image, dtype=np.float64)
        depth = np.asarray(self.gt_depth, dtype=np.float64)
        if img.shape != depth.shape or img.ndim != 2:
            raise ConfigError(f"image {img.shape} and depth {depth.shape} must be matching 2D arrays")
        img.flags.writeable = False
        depth.flags.writeable = False
        object.__setattr__(self, "image", img)
        object.__setattr__(self, "gt_depth", depth)

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape


# ---------------------------------------------------------------- generation


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.standard_normal(4)
    return Rotation.from_quat(q / np.linalg.norm(q)).as_matrix()


def generate_scene(seed: int, params: SceneParams | None = None) -> Scene:
    """Draw a random scene; primitives are scattered inside the initial view frustum."""
    params = params or SceneParams()
    params.validate()
    rng = rng_stream(seed, _STREAM_SCENE)
    view = _random_rotation(rng)
    half_tan = math.tan(math.radians(params.placement_fov_deg) / 2)
    L = params.box_half_extent
    lo, hi = params.size_range

    prims = []
    for _ in range(params.primitive_count):
        kind = "sphere" if rng.random() < params.sphere_fraction else "box"
        size = float(rng.uniform(lo, hi))
        for _attempt in range(1000):
            a, b = rng.uniform(-1, 1, size=2) * half_tan
            ray = np.array([a, b, 1.0])
            direction = view @ (ray / np.linalg.norm(ray))
            dist = rng.uniform(params.min_distance + size * math.sqrt(3), L)
            center = direction * dist
            candidate = Primitive(kind, tuple(float(c) for c in center), size, 0)
            if np.max(np.abs(center)) + size < L and candidate.nearest_distance() >= params.min_distance:
                break
        else:
            raise ConfigError("could not place primitive inside box; enlarge box_half_extent")
        texture_id = int(rng.integers(0, 2**31))
        # coarsest noise cell grows with distance so the finest octave stays above pixel scale
        scale = max(size / 2, float(np.linalg.norm(center)) / 20)
        prims.append(Primitive(kind, candidate.center, size, texture_id, scale))
    wall_tex = int(rng.integers(0, 2**31))
    return Scene(tuple(prims), float(L), int(seed), view, wall_tex)


def sample_trajectory(seed: int, speed: float = 1.0, frame_period: float = 0.1, frame_count: int = 10) -> Trajectory:
    if not speed > 0:
        raise ConfigError(f"speed must be positive, got {speed}")
    if not frame_period > 0:
        raise ConfigError(f"frame_period must be positive, got {frame_period}")
    rng = rng_stream(seed, _STREAM_TRAJECTORY)
    v = rng.standard_normal(3)
    v /= np.linalg.norm(v)
    return Trajectory(tuple(float(x) for x in v), float(speed), float(frame_period), int(frame_count))


def perturb_orientation(pose: CameraPose, noise: OrientationNoise, step_index: int) -> CameraPose:
    """Compose the orientation with a small random Euler rotation of magnitude ``n0``."""
    if noise.n0 == 0:
        return pose
    rng = rng_stream(noise.rng_seed, _STREAM_NOISE, step_index)
    mu = rng.standard_normal(3)
    mu /= np.linalg.norm(mu)
    delta = Rotation.from_euler("xyz", noise.n0 * mu).as_matrix()
    return CameraPose(pose.position, pose.orientation @ delta)


# ---------------------------------------------------------------- tracing


def _trace(scene: Scene, origin: np.ndarray, dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest hit parameter ``t`` along ``origin + t * dirs`` and hit id.

    Hit ids >= 0 index ``scene.primitives``; -1, -2, -3 are the walls normal
    to x, y, z.
    """
    n = dirs.shape[0]
    o = np.asarray(origin, dtype=float)
    L = scene.box_half_extent

    with np.errstate(divide="ignore", invalid="ignore"):
        wall_t = np.where(dirs != 0, (np.sign(dirs) * L - o) / dirs, np.inf)
    best_t = wall_t.min(axis=1)
    best_id = -1 - wall_t.argmin(axis=1)

    if scene._sphere_r.size:
        oc = o - scene._sphere_c  # (S, 3)
        a = np.einsum("ij,ij->i", dirs, dirs)[:, None]
        b = 2.0 * dirs @ oc.T  # (N, S)
        c = np.einsum("ij,ij->i", oc, oc) - scene._sphere_r**2
        disc = b * b - 4 * a * c
        hit = disc >= 0
        sq = np.sqrt(np.where(hit, disc, 0.0))
        t1 = (-b - sq) / (2 * a)
        t2 = (-b + sq) / (2 * a)
        t = np.where(t1 > _EPS_T, t1, np.where(t2 > _EPS_T, t2, np.inf))
        t = np.where(hit, t, np.inf)
        k = t.argmin(axis=1)
        ts = t[np.arange(n), k]
        closer = ts < best_t
        best_t = np.where(closer, ts, best_t)
        best_id = np.where(closer, scene._sphere_idx[k], best_id)

    if scene._box_h.size:
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / dirs  # (N, 3)
            lo = scene._box_c - scene._box_h[:, None] - o  # (B, 3)
            hi = scene._box_c + scene._box_h[:, None] - o
            ta = lo[None, :, :] * inv[:, None, :]
            tb = hi[None, :, :] * inv[:, None, :]
        # axis-parallel rays: 0 * inf gives nan; such rays are inside the slab iff lo <= 0 <= hi
        inside = (lo <= 0) & (hi >= 0)
        ta = np.where(np.isnan(ta), np.where(inside[None], -np.inf, np.inf), ta)
        tb = np.where(np.isnan(tb), np.where(inside[None], np.inf, -np.inf), tb)
        tmin = np.minimum(ta, tb).max(axis=2)
        tmax = np.maximum(ta, tb).min(axis=2)
        hit = tmax >= np.maximum(tmin, _EPS_T)
        t = np.where(hit, np.where(tmin > _EPS_T, tmin, tmax), np.inf)
        k = t.argmin(axis=1)
        tb_best = t[np.arange(n), k]
        closer = tb_best < best_t
        best_t = np.where(closer, tb_best, best_t)
        best_id = np.where(closer, scene._box_idx[k], best_id)

    return best_t, best_id


def ray_depth(scene: Scene, pose: CameraPose, intrinsics: Intrinsics, pixel: tuple[int, int]) -> float:
    """z-depth of the first surface seen through pixel ``(row, col)``."""
    i, j = pixel
    if not (0 <= i < intrinsics.height and 0 <= j < intrinsics.width):
        raise ConfigError(f"pixel {pixel} outside image")
    cx, cy = intrinsics.principal_point
    ray = np.array([(j - cx) / intrinsics.focal_px, (i - cy) / intrinsics.focal_px, 1.0])
    t, _ = _trace(scene, pose.position, (pose.orientation @ ray)[None, :])
    # ray has unit z in the camera frame, so t is already the z-depth
    return float(t[0])


# ---------------------------------------------------------------- texture

_P1 = np.uint64(0x9E3779B97F4A7C15)
_P2 = np.uint64(0xC2B2AE3D27D4EB4F)
_P3 = np.uint64(0x165667B19E3779F9)
_P4 = np.uint64(0x27D4EB2F165667C5)


def _hash_unit(ix, iy, iz, seed) -> np.ndarray:
    """Lattice hash to [0, 1) (splitmix64 finaliser)."""
    h = (
        ix.astype(np.int64).view(np.uint64) * _P1
        + iy.astype(np.int64).view(np.uint64) * _P2
        + iz.astype(np.int64).view(np.uint64) * _P3
        + seed * _P4
    )
    h ^= h >> np.uint64(30)
    h *= np.uint64(0xBF58476D1CE4E5B9)
    h ^= h >> np.uint64(27)
    h *= np.uint64(0x94D049BB133111EB)
    h ^= h >> np.uint64(31)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 2**53)


def _value_noise(p: np.ndarray, seed: np.ndarray) -> np.ndarray:
    i0 = np.floor(p)
    f = p - i0
    s = f * f * (3 - 2 * f)
    i0 = i0.astype(np.int64)
    out = np.zeros(p.shape[0])
    for dx in (0, 1):
        wx = s[:, 0] if dx else 1 - s[:, 0]
        for dy in (0, 1):
            wy = s[:, 1] if dy else 1 - s[:, 1]
            for dz in (0, 1):
                wz = s[:, 2] if dz else 1 - s[:, 2]
                h = _hash_unit(i0[:, 0] + dx, i0[:, 1] + dy, i0[:, 2] + dz, seed)
                out += wx * wy * wz * h
    return out


def solid_texture(points: np.ndarray, texture_id: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Multi-octave value noise evaluated at world points, in [0, 1]."""
    seed = np.asarray(texture_id).astype(np.uint64)
    total = np.zeros(points.shape[0])
    norm = 0.0
    for octave in range(TEXTURE_OCTAVES):
        amp = 0.5**octave
        freq = 2.0**octave
        total += amp * _value_noise(points * (freq / scale)[:, None], seed + np.uint64(octave * 7919))
        norm += amp
    total /= norm
    return np.clip(0.5 + 1.6 * (total - 0.5), 0.0, 1.0)


def _hit_texture(scene: Scene, points: np.ndarray, hit_id: np.ndarray) -> np.ndarray:
    n_prim = len(scene.primitives)
    tex = np.array([p.texture_id for p in scene.primitives] + [scene.wall_texture_id + k for k in (2, 1, 0)], dtype=np.int64)
    scl = np.array([p.texture_scale for p in scene.primitives] + [scene.box_half_extent / 10] * 3)
    # walls -1..-3 map to the trailing slots
    idx = np.where(hit_id >= 0, hit_id, n_prim + 3 + hit_id)
    return solid_texture(points, tex[idx], scl[idx])


def render_frame(scene: Scene, pose: CameraPose, intrinsics: Intrinsics, timestamp: float = 0.0) -> Frame:
    rays = intrinsics.pixel_rays().reshape(-1, 3)
    dirs = rays @ pose.orientation.T
    t, hit = _trace(scene, pose.position, dirs)
    points = pose.position + t[:, None] * dirs
    image = _hit_texture(scene, points, hit)
    shape = intrinsics.shape
    return Frame(image.reshape(shape), t.reshape(shape), float(timestamp), pose)


def trajectory_poses(scene: Scene, trajectory: Trajectory, noise: OrientationNoise | None = None) -> list[CameraPose]:
    poses = []
    for k in range(trajectory.frame_count):
        pose = CameraPose(trajectory.position(k), scene.camera_orientation)
        if noise is not None:
            pose = perturb_orientation(pose, noise, k)
        poses.append(pose)
    return poses


def render_sequence(
    scene: Scene,
    trajectory: Trajectory,
    intrinsics: Intrinsics,
    noise: OrientationNoise | None = None,
) -> list[Frame]:
    """Render every frame of a trajectory (optionally with orientation jitter)."""
    return [
        render_frame(scene, pose, intrinsics, trajectory.timestamp(k))
        for k, pose in enumerate(trajectory_poses(scene, trajectory, noise))
    ]
