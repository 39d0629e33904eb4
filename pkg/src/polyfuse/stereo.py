"""Stereo rectification, SAD block matching and disparity-to-depth conversion.

The rectification rotates both cameras halfway toward each other (square-root
split of their relative rotation), then applies a common rotation that aligns
the rectified x-axis with the baseline so epipolar lines become horizontal
rows. Correspondence is plain block matching: sum of absolute differences,
left-right consistency check, parabolic sub-pixel refinement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import DegenerateBaseline, DimensionMismatch, InvalidRange
from .geometry import CameraIntrinsics, RigidTransform, rotation_sqrt
from .resample import bilinear_sample

DEFAULT_Z_RANGE = (0.15, 12.0)


@dataclass(frozen=True)
class RectificationResult:
    R_left: np.ndarray
    R_right: np.ndarray
    K_rect: CameraIntrinsics
    baseline: float


@dataclass(frozen=True)
class DisparityMap:
    """Per-pixel disparity in pixels; NaN marks invalid pixels."""

    d: np.ndarray

    @property
    def width(self) -> int:
        return self.d.shape[1]

    @property
    def height(self) -> int:
        return self.d.shape[0]

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.d)


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel metric depth in meters; NaN marks invalid pixels."""

    z: np.ndarray

    @property
    def width(self) -> int:
        return self.z.shape[1]

    @property
    def height(self) -> int:
        return self.z.shape[0]

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.z)


def build_rectification(
    K_l: CameraIntrinsics,
    K_r: CameraIntrinsics,
    T_lr: RigidTransform,
    K_rect: CameraIntrinsics | None = None,
) -> RectificationResult:
    """Rectifying rotations for a stereo pair related by P_r = R @ P_l + t.

    Both cameras are first rotated into the halfway frame via the square root
    of R; a shared rotation then maps the baseline direction onto the x-axis.
    K_rect defaults to K_l so depth stays aligned to the left image.
    """
    baseline = float(np.linalg.norm(T_lr.t))
    if baseline < 1e-9:
        raise DegenerateBaseline("stereo baseline is zero")

    half = rotation_sqrt(T_lr.R)
    R_l_half = half          # applied to left-camera points
    R_r_half = half.T        # applied to right-camera points

    # right-camera center in left coords, expressed in the halfway frame
    center_r = -T_lr.R.T @ T_lr.t
    b = R_l_half @ center_r
    x_axis = b / np.linalg.norm(b)
    y_axis = np.cross([0.0, 0.0, 1.0], x_axis)
    y_axis = y_axis / np.linalg.norm(y_axis)
    z_axis = np.cross(x_axis, y_axis)
    R_rect = np.stack([x_axis, y_axis, z_axis])

    return RectificationResult(
        R_left=R_rect @ R_l_half,
        R_right=R_rect @ R_r_half,
        K_rect=K_rect if K_rect is not None else K_l,
        baseline=baseline,
    )


def rectify_image(
    img: np.ndarray,
    R_cam: np.ndarray,
    K_orig: CameraIntrinsics,
    K_rect: CameraIntrinsics,
    fill=np.nan,
) -> np.ndarray:
    """Warp an image into the rectified frame (R_cam maps original to rectified).

    Each output pixel's ray is rotated back through R_cam^-1 and projected via
    K_orig; sampling is bilinear, out-of-source pixels get `fill`.
    """
    img = np.asarray(img, dtype=float)
    if img.shape[0] != K_orig.height or img.shape[1] != K_orig.width:
        raise DimensionMismatch(
            f"image {img.shape[:2]} does not match intrinsics "
            f"({K_orig.height}, {K_orig.width})"
        )
    uu, vv = np.meshgrid(
        np.arange(K_rect.width, dtype=float), np.arange(K_rect.height, dtype=float)
    )
    rays = np.stack(
        [(uu - K_rect.cx) / K_rect.fx, (vv - K_rect.cy) / K_rect.fy, np.ones_like(uu)],
        axis=-1,
    )
    src = rays @ R_cam  # == (R_cam.T @ ray) per pixel
    z = src[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        su = K_orig.fx * src[..., 0] / z + K_orig.cx
        sv = K_orig.fy * src[..., 1] / z + K_orig.cy
    bad = z <= 0
    su[bad] = -1e9
    sv[bad] = -1e9
    return bilinear_sample(img, su, sv, fill=fill)


def match_disparity(
    left: np.ndarray,
    right: np.ndarray,
    block_radius: int = 4,
    d_range: tuple[int, int] = (0, 64),
    texture_threshold: float = 4.0,
    lr_tolerance: float = 1.0,
) -> DisparityMap:
    """Block-matching disparity between rectified images.

    SAD cost over (2r+1)^2 blocks across d_range, smallest disparity winning
    ties; pixels failing the left-right consistency check (reverse match off
    by more than `lr_tolerance` px) or falling below the block intensity
    variance `texture_threshold` become NaN. Sub-pixel refinement fits a
    parabola through the costs at d-1, d, d+1.
    """
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if left.shape != right.shape:
        raise DimensionMismatch("left and right images differ in shape")
    d_min, d_max = int(d_range[0]), int(d_range[1])
    if d_min > d_max:
        raise InvalidRange(f"d_range {d_range} has min > max")
    if d_min < 0:
        raise InvalidRange("disparities must be non-negative")

    h, w = left.shape
    size = 2 * block_radius + 1
    n_d = d_max - d_min + 1
    big = 1e30

    cost = np.full((n_d, h, w), big, dtype=np.float32)
    for i, d in enumerate(range(d_min, d_max + 1)):
        if d >= w:
            continue
        diff = np.abs(left[:, d:] - right[:, : w - d]).astype(np.float32)
        agg = uniform_filter(diff, size=size, mode="nearest")
        cost[i, :, d:] = agg

    best = np.argmin(cost, axis=0)  # first (smallest d) minimum wins ties
    rows, cols = np.indices((h, w))
    c0 = cost[best, rows, cols]

    disp = (best + d_min).astype(float)

    # parabolic sub-pixel fit where both neighbours exist and are finite costs
    prev_i = np.clip(best - 1, 0, n_d - 1)
    next_i = np.clip(best + 1, 0, n_d - 1)
    cm = cost[prev_i, rows, cols]
    cp = cost[next_i, rows, cols]
    interior = (best > 0) & (best < n_d - 1) & (cm < big) & (cp < big)
    denom = cm - 2.0 * c0 + cp
    with np.errstate(divide="ignore", invalid="ignore"):
        offset = 0.5 * (cm - cp) / denom
    refine = interior & (denom > 0) & (np.abs(offset) <= 1.0)
    disp = np.where(refine, disp + np.where(refine, offset, 0.0), disp)

    valid = c0 < big

    # left-right consistency from the same cost volume: right pixel x matches
    # left pixel x + d at disparity d
    cost_r = np.full((n_d, h, w), big, dtype=np.float32)
    for i, d in enumerate(range(d_min, d_max + 1)):
        if d >= w:
            continue
        cost_r[i, :, : w - d] = cost[i, :, d:]
    best_r = np.argmin(cost_r, axis=0) + d_min
    xr = np.clip(np.rint(cols - disp).astype(int), 0, w - 1)
    d_back = best_r[rows, xr]
    valid &= np.abs(disp - d_back) <= lr_tolerance

    # texture gate: reject low-variance blocks in the reference image
    mean = uniform_filter(left, size=size, mode="nearest")
    mean_sq = uniform_filter(left * left, size=size, mode="nearest")
    variance = np.maximum(mean_sq - mean * mean, 0.0)
    valid &= variance >= texture_threshold

    disp = np.where(valid, disp, np.nan)
    return DisparityMap(d=disp)


def disparity_to_depth(
    disp: DisparityMap,
    f: float,
    baseline: float,
    z_range: tuple[float, float] = DEFAULT_Z_RANGE,
) -> DepthMap:
    """z = f * baseline / d; pixels with d <= 0 or z outside z_range go NaN."""
    if f <= 0:
        raise ValueError("focal length must be positive")
    if baseline <= 0:
        raise ValueError("baseline must be positive")
    d = disp.d
    with np.errstate(divide="ignore", invalid="ignore"):
        z = f * baseline / d
    z_min, z_max = z_range
    z = np.where((d > 0) & (z >= z_min) & (z <= z_max), z, np.nan)
    return DepthMap(z=z)
