import csv
from pathlib import Path

import pytest
from matplotlib.container import ErrorbarContainer

from dtnplots.figures import (
    FigureError,
    FigureSpec,
    SWEEP_AXES,
    STABILITY_AXES,
    build_figure,
    render,
    render_all,
)

COLUMNS = [
    "protocol", "sweep_param", "sweep_value", "n_runs",
    "delivery_ratio_mean", "delivery_ratio_std",
    "avg_hop_count_mean", "avg_hop_count_std",
    "avg_hop_per_delivered_mean", "avg_hop_per_delivered_std",
    "overhead_ratio_mean", "overhead_ratio_std",
    "overhead_undefined_count", "observed_max_hop",
    "created_mean", "relayed_mean", "delivered_mean",
]

PROTOCOLS = ["grone", "epidemic", "snw", "fc"]


def write_aggregate(path: Path, axis: str, values, protocols=PROTOCOLS,
                    undefined_overhead_at=None):
    rows = []
    for p_idx, protocol in enumerate(protocols):
        for v_idx, value in enumerate(values):
            overhead = f"{10.0 + 5 * p_idx + v_idx:.6f}"
            overhead_std = "0.500000"
            if undefined_overhead_at == (protocol, value):
                overhead = ""
                overhead_std = ""
            rows.append({
                "protocol": protocol,
                "sweep_param": axis,
                "sweep_value": f"{value:g}",
                "n_runs": "5",
                "delivery_ratio_mean": f"{0.4 + 0.1 * p_idx + 0.02 * v_idx:.6f}",
                "delivery_ratio_std": "0.030000",
                "avg_hop_count_mean": f"{1.0 + p_idx + 0.1 * v_idx:.6f}",
                "avg_hop_count_std": "0.200000",
                "avg_hop_per_delivered_mean": "2.000000",
                "avg_hop_per_delivered_std": "0.100000",
                "overhead_ratio_mean": overhead,
                "overhead_ratio_std": overhead_std,
                "overhead_undefined_count": "0",
                "observed_max_hop": "7",
                "created_mean": "90.000000",
                "relayed_mean": "800.000000",
                "delivered_mean": "60.000000",
            })
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    return path


def spec_for(tmp_path, metric="delivery_ratio", protocols=PROTOCOLS, **kw):
    table = write_aggregate(tmp_path / "aggregate_buffer_size.csv",
                            "buffer_size", [2, 4, 6, 8, 10], **kw)
    return FigureSpec(
        metric=metric, x_axis="buffer_size", protocols=list(protocols),
        table=table, output=tmp_path / "out.png",
    )


def test_render_writes_image(tmp_path):
    out = render(spec_for(tmp_path))
    assert out.exists() and out.stat().st_size > 0


def test_one_series_per_protocol_with_error_bars(tmp_path):
    fig = build_figure(spec_for(tmp_path))
    ax = fig.axes[0]
    containers = [c for c in ax.containers if isinstance(c, ErrorbarContainer)]
    assert len(containers) == len(PROTOCOLS)
    assert all(c.has_yerr for c in containers)
    legend_texts = [t.get_text() for t in ax.get_legend().get_texts()]
    assert len(legend_texts) == len(PROTOCOLS)


def test_series_sorted_ascending(tmp_path):
    table = write_aggregate(tmp_path / "t.csv", "node_speed", [0.8, 0.2, 0.5],
                            protocols=["grone"])
    fig = build_figure(FigureSpec("delivery_ratio", "node_speed", ["grone"],
                                  table, tmp_path / "o.png"))
    line = fig.axes[0].containers[0][0]
    assert list(line.get_xdata()) == [0.2, 0.5, 0.8]


def test_undefined_overhead_rows_skipped(tmp_path):
    spec = spec_for(tmp_path, metric="overhead_ratio", protocols=["grone"],
                    undefined_overhead_at=("grone", 2))
    fig = build_figure(spec)
    line = fig.axes[0].containers[0][0]
    assert list(line.get_xdata()) == [4, 6, 8, 10]


def test_missing_column_is_error(tmp_path):
    table = tmp_path / "bad.csv"
    table.write_text("protocol,sweep_value\ngrone,2\n")
    spec = FigureSpec("delivery_ratio", "buffer_size", ["grone"], table,
                      tmp_path / "o.png")
    with pytest.raises(FigureError):
        build_figure(spec)


def test_empty_table_is_error(tmp_path):
    table = tmp_path / "empty.csv"
    table.write_text(",".join(COLUMNS) + "\n")
    spec = FigureSpec("delivery_ratio", "buffer_size", ["grone"], table,
                      tmp_path / "o.png")
    with pytest.raises(FigureError):
        build_figure(spec)


def test_empty_protocol_filter_is_error(tmp_path):
    with pytest.raises(FigureError):
        build_figure(spec_for(tmp_path, protocols=[]))


def test_unknown_protocol_is_error(tmp_path):
    with pytest.raises(FigureError):
        build_figure(spec_for(tmp_path, protocols=["grone", "absent"]))


def test_unknown_metric_is_error(tmp_path):
    with pytest.raises(FigureError):
        build_figure(spec_for(tmp_path, metric="latency"))


def test_identical_inputs_identical_series(tmp_path):
    spec = spec_for(tmp_path)
    fig1 = build_figure(spec)
    fig2 = build_figure(spec)
    for c1, c2 in zip(fig1.axes[0].containers, fig2.axes[0].containers):
        assert list(c1[0].get_xdata()) == list(c2[0].get_xdata())
        assert list(c1[0].get_ydata()) == list(c2[0].get_ydata())


def fixture_dir(tmp_path):
    values = {
        "message_interval": [20, 30, 40, 50, 60],
        "buffer_size": [2, 4, 6, 8, 10],
        "node_speed": [0.2, 0.4, 0.6, 0.8],
        "radius_R": [20, 60, 100, 140, 180],
        "node_count": [40, 80, 120],
        "sim_duration": [1, 3, 5],
    }
    for axis, vals in values.items():
        write_aggregate(tmp_path / f"aggregate_{axis}.csv", axis, vals)
    return tmp_path


def test_render_all_family(tmp_path):
    outputs = render_all(fixture_dir(tmp_path), tmp_path / "figs",
                         hop_exclude=["snw"])
    assert len(outputs) == 3 * len(SWEEP_AXES) + len(STABILITY_AXES)
    assert all(p.exists() for p in outputs)


def test_hop_exclusion_drops_series(tmp_path):
    d = fixture_dir(tmp_path)
    table = d / "aggregate_buffer_size.csv"
    full = build_figure(FigureSpec("avg_hop_count", "buffer_size", PROTOCOLS,
                                   table, d / "a.png"))
    spec = FigureSpec("avg_hop_count", "buffer_size",
                      [p for p in PROTOCOLS if p != "snw"], table, d / "b.png")
    reduced = build_figure(spec)
    assert len(full.axes[0].containers) == 4
    assert len(reduced.axes[0].containers) == 3


def test_cli_single_figure(tmp_path, capsys):
    from dtnplots.cli import main

    write_aggregate(tmp_path / "agg.csv", "buffer_size", [2, 6, 10])
    code = main([
        "figure", "--table", str(tmp_path / "agg.csv"),
        "--metric", "delivery_ratio", "--x-axis", "buffer_size",
        "--protocols", "grone,epidemic", "--output", str(tmp_path / "f.png"),
    ])
    assert code == 0
    assert (tmp_path / "f.png").exists()


def test_cli_all(tmp_path):
    from dtnplots.cli import main

    fixture_dir(tmp_path)
    code = main(["all", "--input-dir", str(tmp_path),
                 "--output-dir", str(tmp_path / "figs")])
    assert code == 0
    assert len(list((tmp_path / "figs").glob("*.png"))) == 14


def test_cli_error_path(tmp_path, capsys):
    from dtnplots.cli import main

    code = main(["figure", "--table", str(tmp_path / "missing.csv"),
                 "--metric", "delivery_ratio", "--x-axis", "buffer_size",
                 "--protocols", "grone", "--output", str(tmp_path / "f.png")])
    assert code == 2
    assert "error" in capsys.readouterr().err
