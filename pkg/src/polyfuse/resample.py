"""Image sampling helpers used by rectification, unwrapping and fusion."""

from __future__ import annotations

import numpy as np


def bilinear_sample(img: np.ndarray, u: np.ndarray, v: np.ndarray, fill=np.nan) -> np.ndarray:
    """Sample `img` at continuous (u, v) with bilinear interpolation.

    `img` may be 2D grayscale or (H, W, C). Samples whose 4-tap footprint
    falls outside the image get `fill`. u is the column coordinate, v the row.
    """
    img = np.asarray(img, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    h, w = img.shape[:2]

    u0 = np.floor(u).astype(int)
    v0 = np.floor(v).astype(int)
    fu = u - u0
    fv = v - v0
    inside = (u >= 0) & (v >= 0) & (u <= w - 1) & (v <= h - 1)

    # clamp so indexing stays legal; out-of-range results are overwritten below
    u0c = np.clip(u0, 0, w - 2) if w > 1 else np.zeros_like(u0)
    v0c = np.clip(v0, 0, h - 2) if h > 1 else np.zeros_like(v0)
    fu = np.where(inside, u - u0c, 0.0)
    fv = np.where(inside, v - v0c, 0.0)

    p00 = img[v0c, u0c]
    p01 = img[v0c, u0c + 1] if w > 1 else p00
    p10 = img[v0c + 1, u0c] if h > 1 else p00
    p11 = img[v0c + 1, u0c + 1] if (w > 1 and h > 1) else p00

    if img.ndim == 3:
        fu = fu[..., None]
        fv = fv[..., None]
        inside_b = inside[..., None]
    else:
        inside_b = inside

    out = (
        p00 * (1 - fu) * (1 - fv)
        + p01 * fu * (1 - fv)
        + p10 * (1 - fu) * fv
        + p11 * fu * fv
    )
    return np.where(inside_b, out, fill)


def nearest_sample(img: np.ndarray, u: np.ndarray, v: np.ndarray, fill=np.nan) -> np.ndarray:
    """Round-half-up nearest-neighbour sampling with `fill` outside bounds."""
    img = np.asarray(img, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    h, w = img.shape[:2]
    ui = np.floor(u + 0.5).astype(int)
    vi = np.floor(v + 0.5).astype(int)
    inside = (ui >= 0) & (vi >= 0) & (ui < w) & (vi < h)
    uic = np.clip(ui, 0, w - 1)
    vic = np.clip(vi, 0, h - 1)
    out = img[vic, uic]
    if img.ndim == 3:
        inside = inside[..., None]
    return np.where(inside, out, fill)
