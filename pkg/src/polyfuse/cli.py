"""polyfuse command line: batch pipeline runs, benchmarking, synthetic scenes.

Exit codes: 0 success, 2 config/validation error, 3 processing error,
4 I/O error.
"""

from __future__ import annotations

import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import io as pio
from . import pipeline, report, synth
from .errors import CalibrationError, PolyfuseError
from .fusion import ClassTable, LabelMap
from .panoramic import build_unwrap, unwrap_image
from .polarization import MosaicFrame

EXIT_CONFIG = 2
EXIT_PROCESSING = 3
EXIT_IO = 4

log = logging.getLogger("polyfuse")


def _setup_logging():
    level = os.environ.get("POLYFUSE_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


@click.group()
def main():
    """Multimodal vision toolkit: stereo depth, DoLP, panoramas, water hazards."""
    _setup_logging()


def _resolve(base: Path, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else base / p


def _load_frame_inputs(base: Path, inputs: dict, stages) -> dict:
    loaded = {}
    if "depth" in stages:
        loaded["left"] = np.asarray(
            pio.read_image(_resolve(base, inputs["left"])), dtype=float
        )
        loaded["right"] = np.asarray(
            pio.read_image(_resolve(base, inputs["right"])), dtype=float
        )
        for key in ("left", "right"):
            if loaded[key].ndim == 3:
                loaded[key] = loaded[key][..., :3].mean(axis=-1)
    if "dolp" in stages:
        raw = pio.read_image(_resolve(base, inputs["mosaic"]))
        loaded["mosaic"] = MosaicFrame(intensity=np.asarray(raw, dtype=float) / 65535.0)
    if "unwrap" in stages:
        ann = pio.read_image(_resolve(base, inputs["annular"]))
        if ann.ndim == 3:
            ann = ann[..., :3]
        loaded["annular"] = ann
    if "fuse" in stages:
        loaded["labels"] = LabelMap(
            class_id=pio.read_labels_png(_resolve(base, inputs["labels"]))
        )
    return loaded


def _run_one(calib, cfg_obj, inputs, base, out_dir, overrides) -> None:
    stages = tuple(cfg_obj.get("stages", pipeline.ALL_STAGES))
    params = dict(cfg_obj.get("parameters", {}))
    params.update({k: v for k, v in overrides.items() if v is not None})
    classes = ClassTable()
    if "class_table" in cfg_obj:
        classes = pio.load_class_table(_resolve(base, cfg_obj["class_table"]))
    config = pipeline.PipelineConfig(
        calibration=calib,
        stages=stages,
        classes=classes,
        block_radius=int(params.get("block_radius", 4)),
        d_range=tuple(params.get("d_range", (0, 64))),
        delta=float(params.get("delta", 0.6)),
        demosaic_mode=params.get("demosaic", "superpixel"),
        lookup_mode=params.get("lookup", "nearest"),
        unwrap_width=params.get("unwrap_width"),
        fill_depth=int(params.get("fill_depth", 0)),
        **_load_frame_inputs(base, inputs, stages),
    )
    config.validate()
    result = pipeline.execute(config)
    artifacts = pipeline.write_artifacts(result, out_dir)
    report.write_run_report(
        Path(out_dir) / "report.json", result.timings, result.stats, artifacts
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--delta", type=float, default=None, help="water-hazard DoLP threshold")
@click.option("--demosaic", type=click.Choice(["superpixel", "bilinear"]), default=None)
@click.option("--lookup", type=click.Choice(["nearest", "bilinear"]), default=None)
@click.option("--fill-depth", type=str, default=None, help="median:k depth infill")
@click.option("--jobs", type=int, default=1, help="concurrent frames in a batch")
def run(config_path, delta, demosaic, lookup, fill_depth, jobs):
    """Run the processing pipeline described by a JSON config file."""
    base = Path(config_path).resolve().parent
    try:
        with open(config_path) as fh:
            cfg_obj = json.load(fh)
        calib = pio.load_calibration(_resolve(base, cfg_obj["calibration"]))
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (CalibrationError, KeyError) as exc:
        click.echo(f"calibration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    overrides = {"delta": delta, "demosaic": demosaic, "lookup": lookup}
    if fill_depth:
        if not fill_depth.startswith("median:"):
            click.echo("--fill-depth must look like median:k", err=True)
            sys.exit(EXIT_CONFIG)
        overrides["fill_depth"] = int(fill_depth.split(":", 1)[1])

    out_root = _resolve(base, cfg_obj.get("output_dir", "out"))
    inputs = cfg_obj["inputs"]
    frames = inputs if isinstance(inputs, list) else [inputs]

    # validate every frame's config before any processing starts
    try:
        stages = tuple(cfg_obj.get("stages", pipeline.ALL_STAGES))
        for frame in frames:
            needed = {"depth": ["left", "right"], "dolp": ["mosaic"],
                      "unwrap": ["annular"], "fuse": ["labels"]}
            for stage in stages:
                for key in needed[stage]:
                    if key not in frame:
                        raise PolyfuseError(f"stage {stage} needs input {key!r}")
    except PolyfuseError as exc:
        click.echo(f"validation error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    def process(i_frame):
        i, frame = i_frame
        out_dir = out_root if len(frames) == 1 else out_root / frame.get("name", f"frame{i:04d}")
        _run_one(calib, cfg_obj, frame, base, out_dir, overrides)

    try:
        if jobs > 1 and len(frames) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                list(pool.map(process, enumerate(frames)))
        else:
            for item in enumerate(frames):
                process(item)
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(EXIT_IO)
    except PolyfuseError as exc:
        click.echo(f"processing error: {exc}", err=True)
        sys.exit(EXIT_PROCESSING)
    click.echo(f"wrote artifacts to {out_root}")


@main.command()
@click.option("--resolution", default="320x240,640x480",
              help="comma-separated WxH presets")
@click.option("--frames", type=int, default=20)
@click.option("--out", "out_dir", type=click.Path(), default="bench_out")
def bench(resolution, frames, out_dir):
    """Throughput benchmark on in-memory synthetic frames."""
    try:
        reports = []
        for res in resolution.split(","):
            w, h = (int(x) for x in res.lower().split("x"))
            rep = pipeline.benchmark((w, h), frames=frames)
            reports.append(rep)
            click.echo(f"{rep['resolution']}: {rep['fps']:.2f} FPS "
                       f"(mean frame {rep['end_to_end']['mean_s'] * 1e3:.1f} ms)")
        written = report.write_bench_report(out_dir, reports)
        for p in written:
            click.echo(f"wrote {p}")
    except (ValueError, PolyfuseError) as exc:
        click.echo(f"benchmark error: {exc}", err=True)
        sys.exit(EXIT_PROCESSING)


@main.command("synth")
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def synth_cmd(scene_path, out_dir):
    """Render a synthetic scene (JSON spec) into a pipeline-ready frame set."""
    try:
        with open(scene_path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"scene error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        _render_scene_files(obj, out)
    except (PolyfuseError, ValueError, KeyError) as exc:
        click.echo(f"render error: {exc}", err=True)
        sys.exit(EXIT_PROCESSING)
    click.echo(f"wrote frame set to {out}")


def _render_scene_files(obj: dict, out: Path) -> None:
    width = int(obj.get("width", 320))
    height = int(obj.get("height", 240))
    noise = float(obj.get("noise_sigma", 0.0))
    seed = int(obj.get("seed", 0))

    if obj.get("preset") == "water_hazard":
        fscene = synth.water_hazard_scene(width, height, noise_sigma=noise, seed=seed)
        spec = fscene.spec
        scene_rig = spec.rig
        rig = fscene.rig
        labels = fscene.labels
        mosaic = fscene.mosaic
        depth = fscene.depth
        left, right, _ = synth.render_stereo(spec)
    else:
        rig = None
        scene_rig = synth.default_rig(
            width, height, baseline=float(obj.get("baseline", 0.1))
        )
        patches = tuple(_patch_from_json(p) for p in obj["patches"])
        spec = synth.SceneSpec(
            patches=patches, rig=scene_rig,
            sky_intensity=float(obj.get("sky_intensity", 0.2)),
            noise_sigma=noise, seed=seed,
        )
        left, right, gt = synth.render_stereo(spec)
        mosaic, _ = synth.render_mosaic(spec)
        depth = gt.depth
        labels = None

    pio.write_gray8(out / "left.png", left)
    pio.write_gray8(out / "right.png", right)
    from PIL import Image

    Image.fromarray(
        np.round(mosaic.intensity * 65535).astype(np.uint16)
    ).save(out / "mosaic.png")
    pio.write_depth_png(out / "depth_gt.png", depth)
    if labels is not None:
        pio.write_labels_png(out / "labels.png", labels.class_id)

    pal = scene_rig.pal
    annulus = synth.render_annulus(pal, "azimuth")
    pio.write_gray8(out / "annulus.png", annulus * 255)

    calib = pio.CalibrationFile(
        K_left=scene_rig.K_left, K_right=scene_rig.K_right,
        K_polar=rig.K_polar if rig is not None else scene_rig.K_polar,
        T_left_to_right=scene_rig.T_left_to_right,
        T_left_to_polar=rig.T_color_to_polar if rig is not None else scene_rig.T_color_to_polar,
        baseline=scene_rig.baseline, pal=pal,
    )
    pio.save_calibration(out / "calibration.json", calib)


def _patch_from_json(p: dict) -> synth.Patch:
    tex = p.get("texture", {})
    return synth.Patch(
        center=tuple(p["center"]),
        axis_a=tuple(p["axis_a"]),
        axis_b=tuple(p["axis_b"]),
        extent_a=float(p["extent_a"]),
        extent_b=float(p["extent_b"]),
        material=p.get("material", "diffuse"),
        n2=float(p.get("n2", 1.33)),
        texture=synth.Texture(
            base=float(tex.get("base", 0.5)),
            amplitude=float(tex.get("amplitude", 0.0)),
            frequency=float(tex.get("frequency", 2.0)),
            seed=int(tex.get("seed", 0)),
        ),
        label=p.get("label", "void"),
    )


@main.command()
@click.option("--calib", "calib_path", required=True, type=click.Path(exists=True))
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--width", type=int, default=None, help="unwrapped width in pixels")
def unwrap(calib_path, in_path, out_path, width):
    """Unwrap an annular PAL image into a rectangular panorama."""
    try:
        calib = pio.load_calibration(calib_path)
        if calib.pal is None:
            click.echo("calibration has no PAL model", err=True)
            sys.exit(EXIT_CONFIG)
        img = pio.read_image(in_path)
        if img.ndim == 3:
            img = img[..., :3]
        mapping = build_unwrap(calib.pal, width)
        pano = unwrap_image(img, mapping, interp="bilinear", fill=0.0)
        if pano.ndim == 2:
            pio.write_gray8(out_path, pano)
        else:
            pio.write_rgb8(out_path, pano)
    except CalibrationError as exc:
        click.echo(f"calibration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(EXIT_IO)
    except PolyfuseError as exc:
        click.echo(f"processing error: {exc}", err=True)
        sys.exit(EXIT_PROCESSING)
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
