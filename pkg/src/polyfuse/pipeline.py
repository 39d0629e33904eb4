"""Batch pipeline execution and the throughput benchmark.

Stages run in dependency order: rectify -> disparity -> depth for the stereo
chain; demosaic -> Stokes -> DoLP for polarization; annulus unwrapping; and
finally fusion of labels, depth and DoLP into the hazard map. File I/O stays
outside the timed regions so benchmark numbers reflect compute only.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as pio
from .errors import PolyfuseError
from .fusion import (
    ClassTable,
    DEFAULT_DELTA,
    LabelMap,
    RegistrationRig,
    detect_water,
    overlay_visualization,
)
from .panoramic import build_unwrap, unwrap_image
from .polarization import MosaicFrame, polarization_frame
from .stereo import (
    DEFAULT_Z_RANGE,
    DepthMap,
    build_rectification,
    disparity_to_depth,
    match_disparity,
    rectify_image,
)
from . import synth

log = logging.getLogger("polyfuse")

ALL_STAGES = ("depth", "dolp", "unwrap", "fuse")


@dataclass
class PipelineConfig:
    calibration: pio.CalibrationFile
    stages: tuple = ALL_STAGES
    left: np.ndarray | None = None
    right: np.ndarray | None = None
    mosaic: MosaicFrame | None = None
    annular: np.ndarray | None = None
    labels: LabelMap | None = None
    classes: ClassTable = field(default_factory=ClassTable)
    block_radius: int = 4
    d_range: tuple = (0, 64)
    z_range: tuple = DEFAULT_Z_RANGE
    delta: float = DEFAULT_DELTA
    demosaic_mode: str = "superpixel"
    lookup_mode: str = "nearest"
    unwrap_width: int | None = None
    fill_depth: int = 0  # median infill kernel (0 = off)

    def validate(self) -> None:
        missing = []
        if "depth" in self.stages and (self.left is None or self.right is None):
            missing.append("depth stage needs left and right images")
        if "dolp" in self.stages and self.mosaic is None:
            missing.append("dolp stage needs a mosaic frame")
        if "unwrap" in self.stages:
            if self.annular is None:
                missing.append("unwrap stage needs an annular image")
            if self.calibration.pal is None:
                missing.append("unwrap stage needs PAL calibration")
        if "fuse" in self.stages:
            if not {"depth", "dolp"} <= set(self.stages):
                missing.append("fuse stage requires the depth and dolp stages")
            if self.labels is None:
                missing.append("fuse stage needs a label map")
        if missing:
            raise PolyfuseError("; ".join(missing))


@dataclass
class PipelineResult:
    depth: DepthMap | None = None
    dolp: np.ndarray | None = None
    panorama: np.ndarray | None = None
    fused: LabelMap | None = None
    overlay: np.ndarray | None = None
    timings: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)


def _median_fill(depth: DepthMap, k: int) -> DepthMap:
    from scipy.ndimage import generic_filter  # local: slow path, optional

    z = depth.z
    filled = z.copy()
    invalid = ~np.isfinite(z)
    med = generic_filter(np.nan_to_num(z, nan=np.nan), np.nanmedian, size=k, mode="nearest")
    filled[invalid] = med[invalid]
    return DepthMap(z=filled)


def execute(config: PipelineConfig) -> PipelineResult:
    """Run the enabled stages on in-memory inputs."""
    config.validate()
    calib = config.calibration
    result = PipelineResult()

    if "depth" in config.stages:
        t0 = time.perf_counter()
        rect = build_rectification(calib.K_left, calib.K_right, calib.T_left_to_right)
        left_r = rectify_image(config.left, rect.R_left, calib.K_left, rect.K_rect, fill=0.0)
        right_r = rectify_image(config.right, rect.R_right, calib.K_right, rect.K_rect, fill=0.0)
        disp = match_disparity(
            left_r, right_r, block_radius=config.block_radius, d_range=config.d_range
        )
        depth = disparity_to_depth(disp, rect.K_rect.fx, rect.baseline, config.z_range)
        if config.fill_depth > 1:
            depth = _median_fill(depth, config.fill_depth)
        result.depth = depth
        result.timings["depth"] = time.perf_counter() - t0
        result.stats["depth_valid_fraction"] = float(np.isfinite(depth.z).mean())

    if "dolp" in config.stages:
        t0 = time.perf_counter()
        frame = polarization_frame(config.mosaic, mode=config.demosaic_mode)
        result.dolp = frame.dolp
        result.timings["dolp"] = time.perf_counter() - t0
        result.stats["dolp_mean"] = float(np.nanmean(frame.dolp))
        result.stats["stokes_residual_max"] = float(frame.residual.max())

    if "unwrap" in config.stages:
        t0 = time.perf_counter()
        mapping = build_unwrap(calib.pal, config.unwrap_width)
        result.panorama = unwrap_image(config.annular, mapping, interp="bilinear", fill=0.0)
        result.timings["unwrap"] = time.perf_counter() - t0

    if "fuse" in config.stages:
        t0 = time.perf_counter()
        rig = RegistrationRig(
            K_color=calib.K_left,
            K_polar=calib.K_polar,
            T_color_to_polar=calib.T_left_to_polar,
        )
        fused = detect_water(
            config.labels,
            result.depth,
            result.dolp,
            rig,
            delta=config.delta,
            classes=config.classes,
            lookup_mode=config.lookup_mode,
        )
        result.fused = fused
        base = config.left if config.left is not None else np.zeros(fused.class_id.shape)
        result.overlay = overlay_visualization(base, fused, config.classes, alpha=0.5)
        result.timings["fuse"] = time.perf_counter() - t0
        hazard = config.classes.id_of("water_hazard")
        result.stats["water_hazard_pixels"] = int((fused.class_id == hazard).sum())

    return result


def write_artifacts(result: PipelineResult, out_dir) -> list:
    """Write every produced artifact; returns the list of paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if result.depth is not None:
        p = out / "depth.png"
        pio.write_depth_png(p, result.depth)
        written.append(p)
    if result.dolp is not None:
        p = out / "dolp.png"
        pio.write_gray8(p, pio.dolp_to_gray8(result.dolp))
        written.append(p)
        p = out / "dolp_color.png"
        pio.write_rgb8(p, pio.dolp_to_pseudocolor(result.dolp))
        written.append(p)
    if result.panorama is not None:
        p = out / "panorama.png"
        pano = result.panorama
        if pano.ndim == 2:
            pio.write_gray8(p, np.clip(pano, 0, 1) * 255 if pano.max() <= 1 else pano)
        else:
            pio.write_rgb8(p, pano)
        written.append(p)
    if result.fused is not None:
        p = out / "labels_fused.png"
        pio.write_labels_png(p, result.fused.class_id)
        written.append(p)
    if result.overlay is not None:
        p = out / "overlay.png"
        pio.write_rgb8(p, result.overlay)
        written.append(p)
    return written


def benchmark(
    resolution: tuple[int, int],
    frames: int = 20,
    block_radius: int = 4,
    d_range: tuple = (0, 48),
    delta: float = DEFAULT_DELTA,
):
    """Repeatedly run all four stages on in-memory synthetic frames.

    Returns per-stage latency statistics (mean/median/p95 seconds) and
    end-to-end FPS. Frame synthesis and any I/O stay outside the timed region.
    """
    if frames < 10:
        raise ValueError("benchmark needs at least 10 frames")
    w, h = resolution
    rig = synth.default_rig(w, h, baseline=0.1)
    scene = synth.plane_scene(2.0, rig=rig)
    left, right, _ = synth.render_stereo(scene)
    fscene = synth.water_hazard_scene(w, h)
    labels, mosaic, reg = fscene.labels, fscene.mosaic, fscene.rig
    # size the annulus so the outer radius fits a 600 px square frame
    r_outer_px = 290.0
    pal = synth.PalModel(
        f=2.13,
        pixel_pitch=2.13 * rig.pal.theta_max / r_outer_px,
        center=(300.0, 300.0),
        theta_min=rig.pal.theta_min,
        theta_max=rig.pal.theta_max,
    )
    annulus = synth.render_annulus(pal, "azimuth", size=600)

    calib = pio.CalibrationFile(
        K_left=rig.K_left, K_right=rig.K_right, K_polar=reg.K_polar,
        T_left_to_right=rig.T_left_to_right,
        T_left_to_polar=reg.T_color_to_polar,
        baseline=rig.baseline, pal=pal,
    )
    config = PipelineConfig(
        calibration=calib,
        left=left, right=right, mosaic=mosaic, annular=annulus, labels=labels,
        block_radius=block_radius, d_range=d_range, delta=delta,
    )

    per_stage: dict[str, list] = {s: [] for s in ALL_STAGES}
    totals = []
    for _ in range(frames):
        t0 = time.perf_counter()
        result = execute(config)
        totals.append(time.perf_counter() - t0)
        for s, dt in result.timings.items():
            per_stage[s].append(dt)

    def stats(xs):
        xs = np.asarray(xs)
        return {
            "mean_s": float(xs.mean()),
            "median_s": float(np.median(xs)),
            "p95_s": float(np.percentile(xs, 95)),
        }

    return {
        "resolution": f"{w}x{h}",
        "frames": frames,
        "fps": float(frames / sum(totals)),
        "end_to_end": stats(totals),
        "stages": {s: stats(v) for s, v in per_stage.items() if v},
    }
