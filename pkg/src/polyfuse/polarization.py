"""Polarizer-mosaic demosaicing, Stokes/DoLP recovery and Fresnel reflectance.

The mosaic follows the wire-grid layout of the Sony IMX250MZR class of
sensors: each 2x2 superpixel reads, clockwise from top-left, the 90, 45, 0
and 135 degree analyzers (90/45 on the top row, 135/0 on the bottom).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    OddDimensions,
    TotalInternalReflection,
    ZeroReflectance,
)

# (row, col) offset of each analyzer orientation inside a 2x2 superpixel
DEFAULT_LAYOUT = {90: (0, 0), 45: (0, 1), 135: (1, 0), 0: (1, 1)}

DEFAULT_EPSILON = 1e-4


@dataclass(frozen=True)
class MosaicFrame:
    """Raw mosaic intensities, linear and normalized to [0, 1]."""

    intensity: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.intensity, dtype=float)
        if arr.shape[0] % 2 or arr.shape[1] % 2:
            raise OddDimensions(f"mosaic shape {arr.shape} not divisible by 2")
        if arr.min() < 0 or arr.max() > 1:
            raise ValueError("mosaic intensities must lie in [0, 1]")
        object.__setattr__(self, "intensity", arr)

    @property
    def width(self) -> int:
        return self.intensity.shape[1]

    @property
    def height(self) -> int:
        return self.intensity.shape[0]


@dataclass(frozen=True)
class PolarizationFrame:
    """Stokes planes plus derived degree of linear polarization.

    `residual` is the per-pixel |(I0+I90) - (I45+I135)| consistency
    diagnostic; it is zero for an ideal sensor.
    """

    S0: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    dolp: np.ndarray
    residual: np.ndarray

    @property
    def width(self) -> int:
        return self.S0.shape[1]

    @property
    def height(self) -> int:
        return self.S0.shape[0]


@dataclass(frozen=True)
class FresnelCoefficients:
    """Signed amplitude ratios for s/p reflection and transmission."""

    r_s: float
    r_p: float
    t_s: float
    t_p: float


def demosaic(mosaic: MosaicFrame, mode: str = "superpixel", layout=None):
    """Split a mosaic into I0, I45, I90, I135 intensity planes.

    superpixel: one output pixel per 2x2 block (half resolution).
    bilinear: full resolution; missing orientations interpolated from the
    nearest same-orientation neighbours with border replication.
    """
    layout = DEFAULT_LAYOUT if layout is None else layout
    m = mosaic.intensity
    if mode == "superpixel":
        planes = {
            ang: m[r::2, c::2].copy() for ang, (r, c) in layout.items()
        }
    elif mode == "bilinear":
        planes = {ang: _interp_orientation(m, r, c) for ang, (r, c) in layout.items()}
    else:
        raise ValueError(f"unknown demosaic mode {mode!r}")
    return planes[0], planes[45], planes[90], planes[135]


def _interp_orientation(m: np.ndarray, r0: int, c0: int) -> np.ndarray:
    """Full-resolution plane for the orientation sampled at (r0, c0) mod 2.

    Separable linear interpolation on the 2-pixel-pitch subgrid, with edge
    replication outside the sampled lattice.
    """
    h, w = m.shape
    sub = m[r0::2, c0::2]
    rows_s = np.arange(r0, h, 2)
    cols_s = np.arange(c0, w, 2)
    # interpolate columns then rows on the coarse lattice
    full_c = np.empty((sub.shape[0], w))
    for j in range(w):
        x = np.clip((j - c0) / 2.0, 0, len(cols_s) - 1)
        j0 = int(np.floor(x))
        j1 = min(j0 + 1, len(cols_s) - 1)
        f = x - j0
        full_c[:, j] = sub[:, j0] * (1 - f) + sub[:, j1] * f
    full = np.empty((h, w))
    for i in range(h):
        y = np.clip((i - r0) / 2.0, 0, len(rows_s) - 1)
        i0 = int(np.floor(y))
        i1 = min(i0 + 1, len(rows_s) - 1)
        f = y - i0
        full[i] = full_c[i0] * (1 - f) + full_c[i1] * f
    return full


def stokes_from_planes(I0, I45, I90, I135):
    """Stokes planes from the four analyzer intensities.

    S0 = I0 + I90 (the I45 + I135 identity is kept as a diagnostic residual),
    S1 = I0 - I90, S2 = I45 - I135.
    """
    arrs = [np.asarray(a, dtype=float) for a in (I0, I45, I90, I135)]
    if len({a.shape for a in arrs}) != 1:
        raise DimensionMismatch("intensity planes differ in shape")
    I0, I45, I90, I135 = arrs
    S0 = I0 + I90
    S1 = I0 - I90
    S2 = I45 - I135
    residual = np.abs((I0 + I90) - (I45 + I135))
    return S0, S1, S2, residual


def dolp(S0, S1, S2, epsilon: float = DEFAULT_EPSILON):
    """Degree of linear polarization sqrt(S1^2 + S2^2) / S0, clamped to [0, 1].

    Pixels with S0 below `epsilon` are returned NaN (too dark to trust).
    """
    S0, S1, S2 = (np.asarray(a, dtype=float) for a in (S0, S1, S2))
    if not (S0.shape == S1.shape == S2.shape):
        raise DimensionMismatch("Stokes planes differ in shape")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    value = np.sqrt(S1 * S1 + S2 * S2) / np.maximum(S0, epsilon)
    value = np.clip(value, 0.0, 1.0)
    return np.where(S0 >= epsilon, value, np.nan)


def polarization_frame(
    mosaic: MosaicFrame, mode: str = "superpixel", epsilon: float = DEFAULT_EPSILON
) -> PolarizationFrame:
    """Demosaic + Stokes + DoLP in one step."""
    I0, I45, I90, I135 = demosaic(mosaic, mode=mode)
    S0, S1, S2, residual = stokes_from_planes(I0, I45, I90, I135)
    return PolarizationFrame(S0=S0, S1=S1, S2=S2, dolp=dolp(S0, S1, S2, epsilon), residual=residual)


def fresnel(n1: float, n2: float, theta_i: float) -> FresnelCoefficients:
    """Fresnel amplitude coefficients at a planar dielectric interface.

    Standard (textbook) form:
      r_s = (n1 cos ti - n2 cos tt) / (n1 cos ti + n2 cos tt)
      r_p = (n2 cos ti - n1 cos tt) / (n2 cos ti + n1 cos tt)
    with the matching transmission numerators 2 n1 cos ti.
    """
    if n1 <= 0 or n2 <= 0:
        raise ValueError("refractive indices must be positive")
    if not (0 <= theta_i < math.pi / 2):
        raise ValueError("incidence angle must lie in [0, pi/2)")
    sin_t = n1 * math.sin(theta_i) / n2
    if sin_t > 1.0:
        raise TotalInternalReflection(
            f"no real refraction for n1={n1}, n2={n2}, theta_i={theta_i}"
        )
    cos_i = math.cos(theta_i)
    cos_t = math.sqrt(1.0 - sin_t * sin_t)
    r_s = (n1 * cos_i - n2 * cos_t) / (n1 * cos_i + n2 * cos_t)
    t_s = 2 * n1 * cos_i / (n1 * cos_i + n2 * cos_t)
    r_p = (n2 * cos_i - n1 * cos_t) / (n2 * cos_i + n1 * cos_t)
    t_p = 2 * n1 * cos_i / (n2 * cos_i + n1 * cos_t)
    return FresnelCoefficients(r_s=r_s, r_p=r_p, t_s=t_s, t_p=t_p)


def reflection_dolp(n1: float, n2: float, theta_i: float) -> float:
    """DoLP of the specularly reflected beam for unpolarized incidence.

    |R_s - R_p| / (R_s + R_p) with R = r^2; reaches 1 exactly at Brewster's
    angle where r_p vanishes.
    """
    c = fresnel(n1, n2, theta_i)
    R_s = c.r_s * c.r_s
    R_p = c.r_p * c.r_p
    total = R_s + R_p
    if total < 1e-15:
        raise ZeroReflectance("both reflectances vanish")
    return abs(R_s - R_p) / total


def brewster_angle(n1: float, n2: float) -> float:
    return math.atan2(n2, n1)
