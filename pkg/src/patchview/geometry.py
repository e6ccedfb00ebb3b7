"""Camera and viewpoint mathematics.

Conventions used throughout the package:

* World frame: right-handed, z-up, object centered at the origin.
* Camera frame: x right, y down, z forward (depth is the camera-frame z,
  positive for points in front of the camera).
* ``Viewpoint`` is the world-to-camera rigid transform:
  ``x_cam = R @ x_world + t``.
* Angles are degrees at every public interface.
* 2D keypoints cross module boundaries normalized to [0, 1]^2; pixel
  coordinates are continuous, with pixel (i, j) covering
  [i, i+1) x [j, j+1) and its center at (i+0.5, j+0.5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import GeometryError, ProjectionError

__all__ = [
    "Viewpoint",
    "SphericalPose",
    "Intrinsics",
    "viewpoint_from_spherical",
    "project_points",
    "DEFAULT_FOCAL",
]

# High focal length keeps perspective effects small for objects that fill
# ~100 px at their working distance.
DEFAULT_FOCAL = 3000.0

_ORTHO_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Viewpoint:
    """World-to-camera rigid transform: ``x_cam = rotation @ x_world + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        err = np.abs(R.T @ R - np.eye(3)).max()
        if err > 1e-6:
            raise GeometryError(f"rotation is not orthonormal (max |R^T R - I| = {err:.3e})")
        if abs(np.linalg.det(R) - 1.0) > 1e-6:
            raise GeometryError("rotation must be proper (det = +1)")

    @classmethod
    def identity(cls) -> "Viewpoint":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> "Viewpoint":
        """Build from a 4x4 homogeneous world-to-camera matrix."""
        m = np.asarray(m, dtype=np.float64).reshape(4, 4)
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous world-to-camera matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def compose(self, other: "Viewpoint") -> "Viewpoint":
        """Transform that applies ``other`` first, then ``self``."""
        return Viewpoint(self.rotation @ other.rotation,
                         self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Viewpoint":
        return Viewpoint(self.rotation.T, -self.rotation.T @ self.translation)

    def camera_center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Map (N, 3) world points into the camera frame."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation


@dataclass(frozen=True)
class SphericalPose:
    """Orbit-style camera pose around a point: azimuth/elevation in degrees, radius in scene units.

    Azimuth is stored modulo 360; azimuth 0 looks down the world +x axis
    toward the target, elevation raises the camera toward +z.
    """

    azimuth_deg: float
    elevation_deg: float
    radius: float

    def __post_init__(self):
        if not math.isfinite(self.azimuth_deg) or not math.isfinite(self.elevation_deg):
            raise GeometryError("angles must be finite")
        if not (self.radius > 0):
            raise GeometryError(f"radius must be > 0, got {self.radius}")
        if not (-90.0 <= self.elevation_deg <= 90.0):
            raise GeometryError(f"elevation_deg must be in [-90, 90], got {self.elevation_deg}")
        object.__setattr__(self, "azimuth_deg", float(self.azimuth_deg) % 360.0)
        object.__setattr__(self, "elevation_deg", float(self.elevation_deg))
        object.__setattr__(self, "radius", float(self.radius))

    def camera_center(self, look_at=(0.0, 0.0, 0.0)) -> np.ndarray:
        az = math.radians(self.azimuth_deg)
        el = math.radians(self.elevation_deg)
        direction = np.array([math.cos(el) * math.cos(az),
                              math.cos(el) * math.sin(az),
                              math.sin(el)])
        return np.asarray(look_at, dtype=np.float64) + self.radius * direction


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics: focal length and principal point, in pixels."""

    focal: float = DEFAULT_FOCAL
    principal_point: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (self.focal > 0):
            raise GeometryError(f"focal must be > 0, got {self.focal}")

    @classmethod
    def for_image(cls, size, focal: float = DEFAULT_FOCAL) -> "Intrinsics":
        """Principal point at the center of an (H, W) image."""
        h, w = size
        return cls(focal=focal, principal_point=(w / 2.0, h / 2.0))

    def matrix(self) -> np.ndarray:
        cx, cy = self.principal_point
        return np.array([[self.focal, 0.0, cx],
                         [0.0, self.focal, cy],
                         [0.0, 0.0, 1.0]])


def viewpoint_from_spherical(pose: SphericalPose,
                             look_at=(0.0, 0.0, 0.0),
                             up=(0.0, 0.0, 1.0)) -> Viewpoint:
    """World-to-camera transform for a camera orbiting ``look_at``.

    The camera sits at ``pose.camera_center(look_at)`` and its optical axis
    (+z, positive depth) points at ``look_at``. ``up`` fixes the roll; it must
    not be parallel to the viewing direction.
    """
    look_at = np.asarray(look_at, dtype=np.float64).reshape(3)
    up = np.asarray(up, dtype=np.float64).reshape(3)
    center = pose.camera_center(look_at)
    forward = look_at - center
    norm = np.linalg.norm(forward)
    if norm == 0:
        raise GeometryError("camera center coincides with look_at")
    forward = forward / norm
    up_norm = np.linalg.norm(up)
    if up_norm == 0:
        raise GeometryError("up vector must be nonzero")
    up = up / up_norm
    right = np.cross(forward, up)
    right_norm = np.linalg.norm(right)
    if right_norm < 1e-12:
        raise GeometryError(
            "degenerate up vector: parallel to the viewing direction "
            f"(azimuth={pose.azimuth_deg}, elevation={pose.elevation_deg})")
    right = right / right_norm
    down = np.cross(forward, right)
    R = np.stack([right, down, forward])
    t = -R @ center
    return Viewpoint(R, t)


def project_points(points: Mapping[str, np.ndarray],
                   view: Viewpoint,
                   k: Intrinsics,
                   image_size=None) -> dict[str, np.ndarray]:
    """Pinhole-project named 3D points.

    Returns pixel coordinates ``(f*x/z + cx, f*y/z + cy)``; if ``image_size``
    is an (H, W) pair the result is normalized to [0, 1] by dividing by
    (W, H). Names and ordering are preserved.

    Raises :class:`ProjectionError` naming every point with non-positive
    depth in the camera frame.
    """
    names = list(points.keys())
    if not names:
        return {}
    pts = np.stack([np.asarray(points[n], dtype=np.float64).reshape(3) for n in names])
    cam = view.transform(pts)
    z = cam[:, 2]
    bad = [n for n, depth in zip(names, z) if depth <= 0]
    if bad:
        raise ProjectionError(
            f"points with non-positive depth: {', '.join(bad)}", names=bad)
    cx, cy = k.principal_point
    u = k.focal * cam[:, 0] / z + cx
    v = k.focal * cam[:, 1] / z + cy
    uv = np.stack([u, v], axis=1)
    if image_size is not None:
        h, w = image_size
        uv = uv / np.array([w, h], dtype=np.float64)
    return {n: uv[i] for i, n in enumerate(names)}
