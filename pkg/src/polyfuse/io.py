"""File formats: calibration JSON, PNG image I/O and artifact encoders.

Depth is exported as 16-bit PNG in millimeters (0 = invalid, ceiling
65.535 m); DoLP as 8-bit grayscale (255 = 1.0) plus a blue-to-red
pseudo-color rendering; label maps as 8-bit single-channel PNG.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import CalibrationError
from .fusion import ClassTable
from .geometry import CameraIntrinsics, RigidTransform, nearest_rotation
from .panoramic import PalModel
from .stereo import DepthMap

ROTATION_CLEANUP_TOL = 1e-6
BASELINE_TOL = 1e-6


@dataclass(frozen=True)
class CalibrationFile:
    K_left: CameraIntrinsics
    K_right: CameraIntrinsics
    K_polar: CameraIntrinsics
    T_left_to_right: RigidTransform
    T_left_to_polar: RigidTransform
    baseline: float
    pal: PalModel | None = None


def _intrinsics_from_json(obj) -> CameraIntrinsics:
    return CameraIntrinsics(
        fx=float(obj["fx"]), fy=float(obj["fy"]),
        cx=float(obj["cx"]), cy=float(obj["cy"]),
        width=int(obj["width"]), height=int(obj["height"]),
    )


def _intrinsics_to_json(K: CameraIntrinsics):
    return {"fx": K.fx, "fy": K.fy, "cx": K.cx, "cy": K.cy,
            "width": K.width, "height": K.height}


def _transform_from_json(obj) -> RigidTransform:
    R = np.asarray(obj["R"], dtype=float).reshape(3, 3)
    clean = nearest_rotation(R)
    if np.abs(clean - R).max() > ROTATION_CLEANUP_TOL:
        raise CalibrationError("rotation matrix too far from orthonormal")
    return RigidTransform(clean, np.asarray(obj["t"], dtype=float))


def _transform_to_json(T: RigidTransform):
    return {"R": T.R.tolist(), "t": T.t.tolist()}


def _pal_from_json(obj) -> PalModel:
    return PalModel(
        f=float(obj["f_mm"]),
        pixel_pitch=float(obj.get("pixel_pitch_mm", 0.003)),
        center=(float(obj["center"][0]), float(obj["center"][1])),
        theta_min=math.radians(float(obj["theta_min_deg"])),
        theta_max=math.radians(float(obj["theta_max_deg"])),
        azimuth_zero=math.radians(float(obj.get("azimuth_zero_deg", 0.0))),
        relative_aperture=obj.get("relative_aperture"),
    )


def _pal_to_json(m: PalModel):
    return {
        "f_mm": m.f,
        "pixel_pitch_mm": m.pixel_pitch,
        "center": list(m.center),
        "theta_min_deg": math.degrees(m.theta_min),
        "theta_max_deg": math.degrees(m.theta_max),
        "azimuth_zero_deg": math.degrees(m.azimuth_zero),
        "relative_aperture": m.relative_aperture,
    }


def load_calibration(path) -> CalibrationFile:
    with open(path) as fh:
        obj = json.load(fh)
    try:
        T_lr = _transform_from_json(obj["T_left_to_right"])
        baseline = float(obj["baseline"])
        if abs(baseline - float(np.linalg.norm(T_lr.t))) > BASELINE_TOL:
            raise CalibrationError(
                "stated baseline disagrees with |t| of T_left_to_right"
            )
        return CalibrationFile(
            K_left=_intrinsics_from_json(obj["K_left"]),
            K_right=_intrinsics_from_json(obj["K_right"]),
            K_polar=_intrinsics_from_json(obj["K_polar"]),
            T_left_to_right=T_lr,
            T_left_to_polar=_transform_from_json(obj["T_left_to_polar"]),
            baseline=baseline,
            pal=_pal_from_json(obj["pal"]) if "pal" in obj else None,
        )
    except (KeyError, ValueError) as exc:
        raise CalibrationError(f"bad calibration file: {exc}") from exc


def save_calibration(path, calib: CalibrationFile) -> None:
    obj = {
        "K_left": _intrinsics_to_json(calib.K_left),
        "K_right": _intrinsics_to_json(calib.K_right),
        "K_polar": _intrinsics_to_json(calib.K_polar),
        "T_left_to_right": _transform_to_json(calib.T_left_to_right),
        "T_left_to_polar": _transform_to_json(calib.T_left_to_polar),
        "baseline": calib.baseline,
    }
    if calib.pal is not None:
        obj["pal"] = _pal_to_json(calib.pal)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def read_image(path) -> np.ndarray:
    """Load a PNG as float: grayscale in [0, 255] (or native 16-bit), RGB as (H, W, 3)."""
    img = Image.open(path)
    return np.asarray(img).astype(float)


def write_gray8(path, arr: np.ndarray) -> None:
    Image.fromarray(np.clip(np.asarray(arr), 0, 255).astype(np.uint8), mode="L").save(path)


def write_rgb8(path, arr: np.ndarray) -> None:
    Image.fromarray(np.clip(np.asarray(arr), 0, 255).astype(np.uint8), mode="RGB").save(path)


def encode_depth_png(depth: DepthMap) -> np.ndarray:
    """Depth to 16-bit millimeters; invalid or out-of-encoding pixels -> 0."""
    mm = np.round(depth.z * 1000.0)
    mm = np.where(np.isfinite(mm) & (mm >= 1) & (mm <= 65535), mm, 0)
    return mm.astype(np.uint16)


def decode_depth_png(arr: np.ndarray) -> DepthMap:
    arr = np.asarray(arr)
    z = np.where(arr > 0, arr / 1000.0, np.nan)
    return DepthMap(z=z)


def write_depth_png(path, depth: DepthMap) -> None:
    Image.fromarray(encode_depth_png(depth)).save(path)


def read_depth_png(path) -> DepthMap:
    return decode_depth_png(np.asarray(Image.open(path), dtype=np.uint16))


def dolp_to_gray8(dolp: np.ndarray) -> np.ndarray:
    """DoLP in [0, 1] to 8-bit grayscale; NaN (invalid) -> 0."""
    d = np.nan_to_num(np.asarray(dolp), nan=0.0)
    return np.round(np.clip(d, 0, 1) * 255).astype(np.uint8)


def dolp_to_pseudocolor(dolp: np.ndarray) -> np.ndarray:
    """Linear colormap 0 -> blue, 1 -> red, as 8-bit RGB."""
    d = np.clip(np.nan_to_num(np.asarray(dolp), nan=0.0), 0, 1)
    rgb = np.zeros(d.shape + (3,))
    rgb[..., 0] = d * 255
    rgb[..., 2] = (1 - d) * 255
    return np.round(rgb).astype(np.uint8)


def write_labels_png(path, class_id: np.ndarray) -> None:
    Image.fromarray(np.asarray(class_id, dtype=np.uint8), mode="L").save(path)


def read_labels_png(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("L"), dtype=np.uint8)


def load_class_table(path) -> ClassTable:
    """Class table JSON: list of {"id": int, "name": str, "color": [r, g, b]}."""
    with open(path) as fh:
        obj = json.load(fh)
    entries = tuple((int(e["id"]), e["name"], tuple(e["color"])) for e in obj)
    return ClassTable(entries=entries)


def save_class_table(path, table: ClassTable) -> None:
    obj = [
        {"id": cid, "name": name, "color": list(color)}
        for cid, name, color in table.entries
    ]
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")
