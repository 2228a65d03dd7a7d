"""Render metric figures from aggregated simulation tables.

Strictly a presentation layer: charts are drawn from the aggregate CSV
tables (one row per protocol and sweep value, mean and std columns per
metric) and never recompute metrics. One line per protocol, x sorted
ascending, error bars from the deviation column.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

METRICS = {
    "delivery_ratio": "delivery ratio",
    "avg_hop_count": "average hop count",
    "overhead_ratio": "overhead ratio",
}

X_LABELS = {
    "message_interval": "message interval (s)",
    "buffer_size": "buffer size (MB)",
    "node_speed": "node speed (m/s)",
    "radius_R": "transmission range (m)",
    "node_count": "number of nodes",
    "sim_duration": "simulation time (h)",
}

PROTOCOL_LABELS = {
    "grone": "GRONE",
    "epidemic": "Epidemic",
    "snw": "Binary Spray & Wait",
    "fc": "FirstContact",
    "dd": "Direct Delivery",
}

# The four comparison axes, plus the two stability axes.
SWEEP_AXES = ["message_interval", "buffer_size", "node_speed", "radius_R"]
STABILITY_AXES = ["node_count", "sim_duration"]


class FigureError(ValueError):
    pass


@dataclass(frozen=True)
class FigureSpec:
    metric: str
    x_axis: str
    protocols: list[str]
    table: Path
    output: Path
    title: str | None = None


def read_rows(table: Path) -> list[dict[str, str]]:
    with open(table, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise FigureError(f"{table}: empty table")
    return rows


def series_for(
    rows: list[dict[str, str]], protocol: str, metric: str
) -> tuple[list[float], list[float], list[float]]:
    """x, mean, std for one protocol, x ascending; rows with an undefined
    metric value (empty cell) are skipped."""
    mean_col = f"{metric}_mean"
    std_col = f"{metric}_std"
    picked = []
    for row in rows:
        if row["protocol"] != protocol:
            continue
        if mean_col not in row or std_col not in row or "sweep_value" not in row:
            raise FigureError(f"missing column {mean_col}/{std_col}/sweep_value")
        if row[mean_col] == "":
            continue
        picked.append(
            (
                float(row["sweep_value"]),
                float(row[mean_col]),
                float(row[std_col]) if row[std_col] != "" else 0.0,
            )
        )
    picked.sort()
    xs = [p[0] for p in picked]
    return xs, [p[1] for p in picked], [p[2] for p in picked]


def build_figure(spec: FigureSpec):
    """Assemble the matplotlib figure for a spec (no file output)."""
    if spec.metric not in METRICS:
        raise FigureError(f"unknown metric {spec.metric!r}")
    if not spec.protocols:
        raise FigureError("no protocols selected")
    rows = read_rows(spec.table)
    present = {row["protocol"] for row in rows}
    fig, ax = plt.subplots(figsize=(5.2, 3.9))
    plotted = 0
    for protocol in spec.protocols:
        if protocol not in present:
            raise FigureError(f"protocol {protocol!r} not in {spec.table}")
        xs, means, stds = series_for(rows, protocol, spec.metric)
        if not xs:
            continue
        ax.errorbar(
            xs, means, yerr=stds, marker="o", capsize=3,
            label=PROTOCOL_LABELS.get(protocol, protocol),
        )
        plotted += 1
    if plotted == 0:
        plt.close(fig)
        raise FigureError(f"no data for metric {spec.metric!r} in {spec.table}")
    ax.set_xlabel(X_LABELS.get(spec.x_axis, spec.x_axis))
    ax.set_ylabel(METRICS[spec.metric])
    if spec.title:
        ax.set_title(spec.title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> Path:
    """Render a spec to its output image file."""
    fig = build_figure(spec)
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.output, dpi=150)
    plt.close(fig)
    return spec.output


def render_all(
    input_dir: Path,
    output_dir: Path,
    protocols: list[str] | None = None,
    hop_exclude: list[str] = (),
    stability_metric: str = "overhead_ratio",
) -> list[Path]:
    """The full figure family: every metric against the four sweep axes
    (12 charts) plus the two stability charts (metric vs node count and vs
    simulation time). Expects aggregate_<axis>.csv files in input_dir.

    hop_exclude drops protocols from the hop-count charts only (a hop-capped
    protocol is not comparable there).
    """
    outputs = []
    for axis in SWEEP_AXES:
        table = input_dir / f"aggregate_{axis}.csv"
        rows = read_rows(table)
        available = list(dict.fromkeys(row["protocol"] for row in rows))
        chosen = protocols or available
        for metric in METRICS:
            selected = [p for p in chosen if metric != "avg_hop_count" or p not in hop_exclude]
            spec = FigureSpec(
                metric=metric,
                x_axis=axis,
                protocols=selected,
                table=table,
                output=output_dir / f"{metric}_vs_{axis}.png",
            )
            outputs.append(render(spec))
    for axis in STABILITY_AXES:
        table = input_dir / f"aggregate_{axis}.csv"
        rows = read_rows(table)
        available = list(dict.fromkeys(row["protocol"] for row in rows))
        spec = FigureSpec(
            metric=stability_metric,
            x_axis=axis,
            protocols=protocols or available,
            table=table,
            output=output_dir / f"stability_{stability_metric}_vs_{axis}.png",
        )
        outputs.append(render(spec))
    return outputs
