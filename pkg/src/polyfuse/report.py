"""Run/benchmark reports: JSON + CSV tables + matplotlib figures."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def write_run_report(path, timings: dict, stats: dict, artifacts: list) -> None:
    obj = {
        "stages": list(timings.keys()),
        "timings_s": timings,
        "stats": stats,
        "artifacts": [str(a) for a in artifacts],
    }
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def write_bench_report(out_dir, reports: list) -> list:
    """Write bench results as JSON + CSV plus a per-stage latency figure.

    `reports` is a list of dicts as returned by pipeline.benchmark; returns
    the paths written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    p = out / "bench_report.json"
    with open(p, "w") as fh:
        json.dump(reports, fh, indent=2)
        fh.write("\n")
    written.append(p)

    p = out / "bench_timings.csv"
    with open(p, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["resolution", "stage", "mean_s", "median_s", "p95_s", "fps"])
        for rep in reports:
            for stage, st in rep["stages"].items():
                writer.writerow(
                    [rep["resolution"], stage, f"{st['mean_s']:.6f}",
                     f"{st['median_s']:.6f}", f"{st['p95_s']:.6f}", ""]
                )
            e2e = rep["end_to_end"]
            writer.writerow(
                [rep["resolution"], "end_to_end", f"{e2e['mean_s']:.6f}",
                 f"{e2e['median_s']:.6f}", f"{e2e['p95_s']:.6f}", f"{rep['fps']:.3f}"]
            )
    written.append(p)

    fig, axes = plt.subplots(1, len(reports), figsize=(5 * len(reports), 4), squeeze=False)
    for ax, rep in zip(axes[0], reports):
        stages = list(rep["stages"].keys())
        means = [rep["stages"][s]["mean_s"] * 1e3 for s in stages]
        ax.bar(stages, means, color="steelblue")
        ax.set_title(f"{rep['resolution']}  ({rep['fps']:.1f} FPS)")
        ax.set_ylabel("mean latency [ms]")
        ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    p = out / "bench_latency.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)
    return written
