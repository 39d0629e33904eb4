"""Panoramic annular lens model (f-theta) and annulus-to-rectangle unwrapping.

The lens projects a cylindrical field of view onto a planar annulus; image
radius grows linearly with field angle (y' = f * theta). Unwrapping unfolds
the annulus into a rectangle: columns sweep azimuth, rows sweep field angle
with the smallest angle at the top.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, OutsideAnnulus, ThetaOutOfFov
from .resample import bilinear_sample, nearest_sample

PALW_MAGIC = b"PALW"


@dataclass(frozen=True)
class PalModel:
    """f-theta lens model plus annulus placement in the image."""

    f: float                 # focal length, millimeters
    pixel_pitch: float       # millimeters per pixel
    center: tuple[float, float]
    theta_min: float         # radians
    theta_max: float         # radians
    azimuth_zero: float = 0.0
    relative_aperture: float | None = None  # metadata only

    def __post_init__(self):
        if self.f <= 0 or self.pixel_pitch <= 0:
            raise ValueError("f and pixel_pitch must be positive")
        if not (0 < self.theta_min < self.theta_max):
            raise ValueError("require 0 < theta_min < theta_max")

    @property
    def r_inner(self) -> float:
        return self.f * self.theta_min / self.pixel_pitch

    @property
    def r_outer(self) -> float:
        return self.f * self.theta_max / self.pixel_pitch


@dataclass(frozen=True)
class UnwrapMapping:
    """Per-output-pixel source coordinates into the annular image."""

    src_u: np.ndarray
    src_v: np.ndarray

    @property
    def out_width(self) -> int:
        return self.src_u.shape[1]

    @property
    def out_height(self) -> int:
        return self.src_u.shape[0]


def pal_radius(model: PalModel, theta) -> np.ndarray:
    """Image radius in pixels for a field angle, by the f-theta law."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < model.theta_min - 1e-12) or np.any(theta > model.theta_max + 1e-12):
        raise ThetaOutOfFov(f"theta outside [{model.theta_min}, {model.theta_max}]")
    return model.f * theta / model.pixel_pitch


def default_unwrap_width(model: PalModel) -> int:
    """Width preserving arc length at the mid-annulus radius."""
    r_mid = 0.5 * (model.r_inner + model.r_outer)
    return int(round(2 * np.pi * r_mid))


def build_unwrap(model: PalModel, out_width: int | None = None) -> UnwrapMapping:
    """Unwrap mapping: column -> azimuth, row -> radius (theta_min at row 0)."""
    if out_width is None:
        out_width = default_unwrap_width(model)
    if out_width < 1:
        raise ValueError("out_width must be >= 1")
    r_in, r_out = model.r_inner, model.r_outer
    out_height = int(round(r_out - r_in))
    cols = np.arange(out_width, dtype=float)
    rows = np.arange(out_height, dtype=float)
    azimuth = model.azimuth_zero + 2 * np.pi * cols / out_width
    if out_height > 1:
        radius = r_in + rows * (r_out - r_in) / (out_height - 1)
    else:
        radius = np.full(1, r_in)
    cu, cv = model.center
    src_u = cu + radius[:, None] * np.cos(azimuth)[None, :]
    src_v = cv + radius[:, None] * np.sin(azimuth)[None, :]
    return UnwrapMapping(src_u=src_u, src_v=src_v)


def unwrap_image(
    annular: np.ndarray, mapping: UnwrapMapping, interp: str = "bilinear", fill=np.nan
) -> np.ndarray:
    """Resample the annular image through the mapping."""
    annular = np.asarray(annular, dtype=float)
    h, w = annular.shape[:2]
    # individual edge samples are filled; a grossly undersized source is an error
    if (
        mapping.src_u.min() < -2
        or mapping.src_v.min() < -2
        or mapping.src_u.max() > w + 1
        or mapping.src_v.max() > h + 1
    ):
        raise DimensionMismatch("annular image does not cover the mapping")
    if interp == "bilinear":
        return bilinear_sample(annular, mapping.src_u, mapping.src_v, fill=fill)
    if interp == "nearest":
        return nearest_sample(annular, mapping.src_u, mapping.src_v, fill=fill)
    raise ValueError(f"unknown interpolation {interp!r}")


def pal_ray(model: PalModel, u) -> np.ndarray:
    """Unit viewing direction for an annulus pixel (inverse f-theta).

    Accepts (2,) or (N, 2); returns (3,) or (N, 3) directions
    (sin t cos az, sin t sin az, cos t) in the lens frame.
    """
    u = np.asarray(u, dtype=float)
    du = u[..., 0] - model.center[0]
    dv = u[..., 1] - model.center[1]
    radius = np.hypot(du, dv)
    theta = radius * model.pixel_pitch / model.f
    if np.any(theta < model.theta_min - 1e-12) or np.any(theta > model.theta_max + 1e-12):
        raise OutsideAnnulus("pixel radius outside the annulus field of view")
    azimuth = np.arctan2(dv, du)
    st = np.sin(theta)
    return np.stack([st * np.cos(azimuth), st * np.sin(azimuth), np.cos(theta)], axis=-1)


def pal_project(model: PalModel, direction) -> np.ndarray:
    """Inverse of pal_ray: unit direction -> annulus pixel."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    theta = np.arccos(np.clip(d[..., 2], -1.0, 1.0))
    radius = pal_radius(model, theta)
    azimuth = np.arctan2(d[..., 1], d[..., 0])
    return np.stack(
        [model.center[0] + radius * np.cos(azimuth), model.center[1] + radius * np.sin(azimuth)],
        axis=-1,
    )


def save_mapping(path, mapping: UnwrapMapping) -> None:
    """Binary export: magic 'PALW', u32-LE width/height, interleaved f32-LE u,v."""
    h, w = mapping.src_u.shape
    inter = np.empty((h, w, 2), dtype="<f4")
    inter[..., 0] = mapping.src_u
    inter[..., 1] = mapping.src_v
    with open(path, "wb") as fh:
        fh.write(PALW_MAGIC)
        fh.write(struct.pack("<II", w, h))
        fh.write(inter.tobytes())


def load_mapping(path) -> UnwrapMapping:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != PALW_MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        w, h = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(w * h * 2 * 4), dtype="<f4").reshape(h, w, 2)
    return UnwrapMapping(
        src_u=data[..., 0].astype(float), src_v=data[..., 1].astype(float)
    )
