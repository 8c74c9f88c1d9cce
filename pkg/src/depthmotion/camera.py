"""Pinhole camera model.

Conventions: camera frame is x right, y down, z forward. A pose's
``orientation`` maps camera-frame vectors to world frame. Pixel (i, j) is
(row, column) and sits at image coordinates (u, v) = (j, i).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class Intrinsics:
    focal_px: float
    principal_point: tuple[float, float]
    width: int
    height: int

    def __post_init__(self):
        if self.focal_px <= 0:
            raise ConfigError(f"focal_px must be positive, got {self.focal_px}")
        if self.width < 1 or self.height < 1:
            raise ConfigError("image dimensions must be positive")
        cx, cy = self.principal_point
        if not (0 <= cx <= self.width and 0 <= cy <= self.height):
            raise ConfigError(f"principal point {self.principal_point} outside image")

    @classmethod
    def from_fov(cls, width: int = 256, height: int = 256, fov_deg: float = 90.0) -> "Intrinsics":
        if not 0 < fov_deg < 180:
            raise ConfigError(f"horizontal fov must be in (0, 180), got {fov_deg}")
        focal = (width / 2) / math.tan(math.radians(fov_deg) / 2)
        return cls(focal, (width / 2, height / 2), width, height)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def matrix(self) -> np.ndarray:
        cx, cy = self.principal_point
        return np.array([[self.focal_px, 0, cx], [0, self.focal_px, cy], [0, 0, 1.0]])

    def pixel_rays(self) -> np.ndarray:
        """Camera-frame rays with unit z component, shape (H, W, 3).

        Scaling a ray by a z-depth gives the 3D point directly.
        """
        cx, cy = self.principal_point
        v, u = np.mgrid[0 : self.height, 0 : self.width].astype(np.float64)
        rays = np.empty((self.height, self.width, 3))
        rays[..., 0] = (u - cx) / self.focal_px
        rays[..., 1] = (v - cy) / self.focal_px
        rays[..., 2] = 1.0
        return rays

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Project camera-frame points (..., 3) to (u, v, z)."""
        cx, cy = self.principal_point
        z = points[..., 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = cx + self.focal_px * points[..., 0] / z
            v = cy + self.focal_px * points[..., 1] / z
        return u, v, z


@dataclass(frozen=True)
class CameraPose:
    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        p = np.array(self.position, dtype=np.float64).reshape(3)
        r = np.array(self.orientation, dtype=np.float64).reshape(3, 3)
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-9) or abs(np.linalg.det(r) - 1) > 1e-9:
            raise ConfigError("orientation must be a rotation matrix")
        p.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", r)

    def to_camera(self, world_vectors: np.ndarray) -> np.ndarray:
        """Rotate world-frame direction vectors into the camera frame."""
        return np.asarray(world_vectors) @ self.orientation

    def to_dict(self) -> dict:
        return {"position": self.position.tolist(), "orientation": self.orientation.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraPose":
        return cls(np.array(d["position"]), np.array(d["orientation"]))
