"""Cross-modal registration and the water-hazard fusion detector.

A pixel of the left color image with known depth is lifted to 3D, moved into
the polarization-camera frame and reprojected; road pixels whose reprojected
DoLP meets the threshold are relabeled as water hazards. Pixels without valid
depth, or whose reprojection falls outside the polarization image, are left
untouched (the polarization FOV covers only part of the color image).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BehindCamera,
    DimensionMismatch,
    InvalidThreshold,
    NonPositiveDepth,
    OutOfBounds,
)
from .geometry import CameraIntrinsics, RigidTransform
from .stereo import DepthMap

VOID_ID = 255

DEFAULT_CLASSES = [
    (0, "road", (128, 64, 128)),
    (1, "sidewalk", (244, 35, 232)),
    (2, "terrain", (152, 251, 152)),
    (3, "vegetation", (107, 142, 35)),
    (4, "sky", (70, 130, 180)),
    (5, "person", (220, 20, 60)),
    (6, "car", (0, 0, 142)),
    (7, "water_hazard", (0, 0, 255)),
    (VOID_ID, "void", (0, 0, 0)),
]

DEFAULT_DELTA = 0.6


@dataclass(frozen=True)
class ClassTable:
    """Semantic class ids with names and visualization colors."""

    entries: tuple = tuple(DEFAULT_CLASSES)

    def __post_init__(self):
        ids = [e[0] for e in self.entries]
        names = [e[1] for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate class ids")
        if "water_hazard" not in names:
            raise ValueError("class table must contain water_hazard")

    def id_of(self, name: str) -> int:
        for cid, cname, _ in self.entries:
            if cname == name:
                return cid
        raise KeyError(name)

    def color_of(self, cid: int):
        for c, _, rgb in self.entries:
            if c == cid:
                return rgb
        raise KeyError(cid)

    @property
    def ids(self):
        return frozenset(e[0] for e in self.entries)


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel 8-bit semantic class ids."""

    class_id: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.class_id, dtype=np.uint8)
        object.__setattr__(self, "class_id", arr)

    @property
    def width(self) -> int:
        return self.class_id.shape[1]

    @property
    def height(self) -> int:
        return self.class_id.shape[0]


@dataclass(frozen=True)
class RegistrationRig:
    """Intrinsics of both cameras plus the color-to-polarization extrinsics."""

    K_color: CameraIntrinsics
    K_polar: CameraIntrinsics
    T_color_to_polar: RigidTransform


def reproject_pixel(rig: RegistrationRig, u_color, z) -> np.ndarray:
    """Map a color-image pixel at depth z into the polarization image.

    Exact composition backproject -> rigid transform -> project; no bounds
    clamping. Accepts a single (u, v) or an (N, 2) batch with matching z.
    """
    u = np.asarray(u_color, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise NonPositiveDepth("reprojection requires z > 0")
    Kc, Kp = rig.K_color, rig.K_polar
    T = rig.T_color_to_polar
    if (
        Kc == Kp
        and np.array_equal(T.R, np.eye(3))
        and np.array_equal(T.t, np.zeros(3))
    ):
        # identity rig: the two pixel grids coincide one-to-one
        return u.copy()
    x = (u[..., 0] - Kc.cx) * z / Kc.fx
    y = (u[..., 1] - Kc.cy) * z / Kc.fy
    p = np.stack([x, y, np.broadcast_to(z, x.shape)], axis=-1)
    q = p @ rig.T_color_to_polar.R.T + rig.T_color_to_polar.t
    zq = q[..., 2]
    if np.any(zq <= 0):
        raise BehindCamera("point behind the polarization camera")
    return np.stack(
        [Kp.fx * q[..., 0] / zq + Kp.cx, Kp.fy * q[..., 1] / zq + Kp.cy], axis=-1
    )


def dolp_lookup(plane: np.ndarray, u, mode: str = "nearest"):
    """Sample a DoLP plane at a continuous pixel coordinate.

    nearest: round-half-up indexing. bilinear: 4-tap interpolation; invalid
    (NaN) neighbours drop out of the weighting, falling back to the nearest
    valid tap when all but one are missing.
    """
    plane = np.asarray(plane, dtype=float)
    u = np.asarray(u, dtype=float)
    h, w = plane.shape
    uu, vv = u[..., 0], u[..., 1]
    if np.any(uu < 0) or np.any(vv < 0) or np.any(uu > w - 1) or np.any(vv > h - 1):
        raise OutOfBounds("lookup coordinate outside the plane")
    if mode == "nearest":
        return plane[
            np.floor(vv + 0.5).astype(int), np.floor(uu + 0.5).astype(int)
        ]
    if mode != "bilinear":
        raise ValueError(f"unknown lookup mode {mode!r}")
    u0 = np.minimum(np.floor(uu).astype(int), w - 2) if w > 1 else np.zeros_like(uu, int)
    v0 = np.minimum(np.floor(vv).astype(int), h - 2) if h > 1 else np.zeros_like(vv, int)
    fu = uu - u0
    fv = vv - v0
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    taps = np.stack(
        [plane[v0, u0], plane[v0, u1], plane[v1, u0], plane[v1, u1]],
        axis=-1,
    )
    weights = np.stack(
        [(1 - fu) * (1 - fv), fu * (1 - fv), (1 - fu) * fv, fu * fv], axis=-1
    )
    valid = np.isfinite(taps)
    weights = np.where(valid, weights, 0.0)
    wsum = weights.sum(axis=-1)
    out = np.where(
        wsum > 0,
        np.nansum(taps * weights, axis=-1) / np.where(wsum > 0, wsum, 1.0),
        np.nan,
    )
    return out


def detect_water(
    labels: LabelMap,
    depth: DepthMap,
    dolp_plane: np.ndarray,
    rig: RegistrationRig,
    delta: float = DEFAULT_DELTA,
    classes: ClassTable | None = None,
    lookup_mode: str = "nearest",
) -> LabelMap:
    """Relabel road pixels with highly polarized reflection as water hazards.

    For each road pixel with valid depth, reproject into the polarization
    image; if inside [0, W-1] x [0, H-1] and DoLP >= delta, the class becomes
    water_hazard. Every other pixel passes through unchanged.
    """
    if not (0 <= delta <= 1):
        raise InvalidThreshold(f"delta {delta} outside [0, 1]")
    classes = classes or ClassTable()
    ids = labels.class_id
    z = depth.z
    if ids.shape != z.shape:
        raise DimensionMismatch("labels and depth differ in shape")
    road = classes.id_of("road")
    hazard = classes.id_of("water_hazard")

    candidate = (ids == road) & np.isfinite(z)
    out = ids.copy()
    if not candidate.any():
        return LabelMap(class_id=out)

    vv, uu = np.nonzero(candidate)
    pts = np.stack([uu.astype(float), vv.astype(float)], axis=-1)
    zc = z[vv, uu]

    Kc, Kp = rig.K_color, rig.K_polar
    x = (pts[:, 0] - Kc.cx) * zc / Kc.fx
    y = (pts[:, 1] - Kc.cy) * zc / Kc.fy
    p = np.stack([x, y, zc], axis=-1)
    q = p @ rig.T_color_to_polar.R.T + rig.T_color_to_polar.t
    zq = q[:, 2]
    front = zq > 0
    up = np.full(len(zc), np.nan)
    vp = np.full(len(zc), np.nan)
    up[front] = Kp.fx * q[front, 0] / zq[front] + Kp.cx
    vp[front] = Kp.fy * q[front, 1] / zq[front] + Kp.cy

    ph, pw = dolp_plane.shape
    inside = front & (up >= 0) & (vp >= 0) & (up <= pw - 1) & (vp <= ph - 1)
    if inside.any():
        sampled = dolp_lookup(
            dolp_plane, np.stack([up[inside], vp[inside]], axis=-1), mode=lookup_mode
        )
        hit = np.zeros(len(zc), dtype=bool)
        hit[inside] = np.isfinite(sampled) & (sampled >= delta)
        out[vv[hit], uu[hit]] = hazard
    return LabelMap(class_id=out)


def overlay_visualization(
    image: np.ndarray, labels: LabelMap, classes: ClassTable | None = None, alpha: float = 0.5
) -> np.ndarray:
    """Blend class colors over an RGB image; void pixels pass through."""
    classes = classes or ClassTable()
    img = np.asarray(image, dtype=float)
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=-1)
    if img.shape[:2] != labels.class_id.shape:
        raise DimensionMismatch("image and labels differ in shape")
    if not (0 <= alpha <= 1):
        raise ValueError("alpha must lie in [0, 1]")
    lut = np.zeros((256, 3))
    mask_lut = np.zeros(256, dtype=bool)
    for cid, name, rgb in classes.entries:
        lut[cid] = rgb
        mask_lut[cid] = name != "void"
    colors = lut[labels.class_id]
    blend_mask = mask_lut[labels.class_id][..., None]
    blended = alpha * colors + (1 - alpha) * img
    out = np.where(blend_mask, blended, img)
    return np.floor(out + 0.5).clip(0, 255).astype(np.uint8)
