"""Pinhole camera model and rigid-body math shared by every module.

Conventions: pixel coordinates are (u, v) = (column, row) with the origin at
the top-left pixel center; the camera looks down +z; all 3D units are meters.
All types are immutable values and all operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation as _Rotation

from .errors import DegenerateRotation, NonPositiveDepth

_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    """Ideal pinhole intrinsics (zero skew, no distortion)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class RigidTransform:
    """Rotation R plus translation t, mapping points as R @ p + t."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float).reshape(3, 3)
        t = np.asarray(self.t, dtype=float).reshape(3)
        if not np.allclose(R.T @ R, np.eye(3), atol=_ORTHO_TOL):
            raise ValueError("R is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("det(R) != 1")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)
        self.R.setflags(write=False)
        self.t.setflags(write=False)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))


def transform_point(T: RigidTransform, p: np.ndarray) -> np.ndarray:
    """Apply a rigid transform: R @ p + t. Accepts (3,) or (N, 3) arrays."""
    p = np.asarray(p, dtype=float)
    return p @ T.R.T + T.t


def compose(T2: RigidTransform, T1: RigidTransform) -> RigidTransform:
    """Composite transform applying T1 first, then T2."""
    return RigidTransform(T2.R @ T1.R, T2.R @ T1.t + T2.t)


def inverse(T: RigidTransform) -> RigidTransform:
    return RigidTransform(T.R.T, -T.R.T @ T.t)


def project(K: CameraIntrinsics, p: np.ndarray) -> np.ndarray:
    """Project camera-frame points to pixels.

    Accepts (3,) or (N, 3); returns (2,) or (N, 2). The result may lie outside
    the image bounds; membership is the caller's concern.
    """
    p = np.asarray(p, dtype=float)
    z = p[..., 2]
    if np.any(z <= 0):
        raise NonPositiveDepth("projection requires z > 0")
    u = K.fx * p[..., 0] / z + K.cx
    v = K.fy * p[..., 1] / z + K.cy
    return np.stack([u, v], axis=-1)


def backproject(K: CameraIntrinsics, u: np.ndarray, z) -> np.ndarray:
    """Lift pixels to camera-frame points at the given depth (z-coordinate)."""
    u = np.asarray(u, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise NonPositiveDepth("backprojection requires z > 0")
    x = (u[..., 0] - K.cx) * z / K.fx
    y = (u[..., 1] - K.cy) * z / K.fy
    return np.stack([x, y, np.broadcast_to(z, x.shape)], axis=-1)


def rotation_sqrt(R: np.ndarray) -> np.ndarray:
    """Square root of a rotation via axis-angle halving.

    Raises DegenerateRotation when the rotation angle is within 1e-9 of pi,
    where the halving axis becomes ambiguous.
    """
    rotvec = _Rotation.from_matrix(np.asarray(R, dtype=float)).as_rotvec()
    angle = np.linalg.norm(rotvec)
    if angle > np.pi - 1e-9:
        raise DegenerateRotation(f"rotation angle {angle} too close to pi")
    return _Rotation.from_rotvec(rotvec * 0.5).as_matrix()


def nearest_rotation(M: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix in the Frobenius sense (polar decomposition)."""
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    R = U @ Vt
    if np.linalg.det(R) < 0:
        U[:, -1] *= -1
        R = U @ Vt
    return R


def rotation_about(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotation matrix for an angle about a (not necessarily unit) axis."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return _Rotation.from_rotvec(axis * angle).as_matrix()
