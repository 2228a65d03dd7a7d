import pytest

from dtnsim.cli import (
    ConfigError,
    SweepSpec,
    desk_preset,
    full_preset,
    main,
    parse_scenario,
    run_sweep,
)
from dtnsim.metrics import read_table


def write_cfg(tmp_path, text):
    path = tmp_path / "scenario.cfg"
    path.write_text(text)
    return path


def test_empty_file_gives_full_defaults(tmp_path):
    s = parse_scenario(write_cfg(tmp_path, ""))
    assert s.node_count == 120
    assert s.world_width == s.world_height == 1000.0
    assert s.radius_R == 100.0
    assert s.node_speed == 0.5
    assert s.buffer_size == 6_000_000
    assert s.message_size == 500_000
    assert s.message_interval == 40.0
    assert s.ttl == 20 * 60.0
    assert s.sim_duration == 5 * 3600.0
    assert s.clock_step == 0.1
    assert s.bandwidth == 250_000.0
    assert s.snw_tickets == 18


def test_values_with_unit_suffixes(tmp_path):
    s = parse_scenario(write_cfg(tmp_path, """
# buffer sweep lower bound
node_buffer_size=2MB
message_ttl=10min
simulation_time=1h
transmission_range=80m
message_interval=20s
transmission_speed=250KBps
"""))
    assert s.buffer_size == 2_000_000
    assert s.ttl == 600.0
    assert s.sim_duration == 3600.0
    assert s.radius_R == 80.0
    assert s.message_interval == 20.0


def test_negative_speed_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        parse_scenario(write_cfg(tmp_path, "node_moving_speed=-1\n"))


def test_unknown_key_is_hard_error(tmp_path):
    with pytest.raises(ConfigError):
        parse_scenario(write_cfg(tmp_path, "warp_factor=9\n"))


def test_bad_unit_rejected(tmp_path):
    with pytest.raises(ConfigError):
        parse_scenario(write_cfg(tmp_path, "node_buffer_size=2KB\n"))


def test_movement_model_fixed(tmp_path):
    parse_scenario(write_cfg(tmp_path, "movement_model=random_walk\n"))
    with pytest.raises(ConfigError):
        parse_scenario(write_cfg(tmp_path, "movement_model=waypoint\n"))


def test_missing_file_errors(tmp_path):
    with pytest.raises(OSError):
        parse_scenario(tmp_path / "absent.cfg")


def test_presets():
    desk = desk_preset()
    assert (desk.node_count, desk.world_width, desk.sim_duration) == (40, 500.0, 3600.0)
    full = full_preset()
    assert (full.node_count, full.world_width, full.sim_duration) == (120, 1000.0, 18000.0)


def fast_base():
    return desk_preset().__class__(
        node_count=8, world_width=200.0, world_height=200.0, radius_R=60.0,
        message_interval=5.0, ttl=120.0, sim_duration=30.0, seed=1,
    )


def test_sweep_spec_validation():
    base = fast_base()
    with pytest.raises(ConfigError):
        SweepSpec(base, "message_interval", [], [1]).validate()
    with pytest.raises(ConfigError):
        SweepSpec(base, "message_interval", [30, 20], [1]).validate()
    with pytest.raises(ConfigError):
        SweepSpec(base, "message_interval", [20, 30], [1, 1]).validate()
    with pytest.raises(ConfigError):
        SweepSpec(base, "bogus", [1], [1]).validate()
    SweepSpec(base, None, [None], [1]).validate()


def test_run_sweep_row_counts(tmp_path):
    spec = SweepSpec(fast_base(), "message_interval", [5, 10], seeds=[1, 2])
    result = run_sweep(spec, tmp_path, protocols=["grone", "dd"])
    runs = read_table(result["runs_table"])
    agg = read_table(result["aggregate_table"])
    assert len(runs) == 8  # 2 protocols x 2 values x 2 seeds
    assert len(agg) == 4  # one aggregated row per (protocol, value)
    assert {(r["protocol"], r["sweep_value"]) for r in agg} == {
        ("grone", "5"), ("grone", "10"), ("dd", "5"), ("dd", "10"),
    }
    assert result["failures"] == []


def test_run_sweep_deterministic_bytes(tmp_path):
    spec = SweepSpec(fast_base(), None, [None], seeds=[1])
    r1 = run_sweep(spec, tmp_path / "a")
    r2 = run_sweep(spec, tmp_path / "b")
    assert (r1["runs_table"]).read_bytes() == (r2["runs_table"]).read_bytes()
    assert (r1["aggregate_table"]).read_bytes() == (r2["aggregate_table"]).read_bytes()


def test_run_sweep_single_run_zero_deviation(tmp_path):
    spec = SweepSpec(fast_base(), None, [None], seeds=[7])
    result = run_sweep(spec, tmp_path)
    (row,) = read_table(result["aggregate_table"])
    assert row["n_runs"] == "1"
    assert float(row["delivery_ratio_std"]) == 0.0


def test_run_sweep_event_logs_and_parallel(tmp_path):
    spec = SweepSpec(fast_base(), None, [None], seeds=[1, 2])
    result = run_sweep(spec, tmp_path, verbose_logs=True, parallel=2)
    logs = sorted(p.name for p in tmp_path.glob("events_*.log"))
    assert logs == ["events_grone_none_seed1.log", "events_grone_none_seed2.log"]
    assert result["n_runs"] == 2


def test_run_sweep_failure_manifest(tmp_path):
    bad_base = fast_base().__class__(node_count=1, sim_duration=10.0)
    spec = SweepSpec(bad_base, None, [None], seeds=[1, 2])
    result = run_sweep(spec, tmp_path)
    assert len(result["failures"]) == 2
    assert (tmp_path / "failures.json").exists()
    assert read_table(result["runs_table"]) == []  # partial results flushed


def test_main_end_to_end(tmp_path, monkeypatch, capsys):
    cfg = write_cfg(tmp_path, """
number_of_nodes=8
world_size=200
transmission_range=60m
message_interval=5s
message_ttl=2min
simulation_time=0.005h
""")
    monkeypatch.setenv("DTNSIM_OUTPUT_DIR", str(tmp_path / "out"))
    code = main(["--scenario", str(cfg), "--protocols", "dd", "--seeds", "1"])
    assert code == 0
    assert (tmp_path / "out" / "runs_none.csv").exists()
    assert "aggregated" in capsys.readouterr().out


def test_main_rejects_bad_config(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "node_moving_speed=-1\n")
    assert main(["--scenario", str(cfg)]) == 2
    assert "error" in capsys.readouterr().err
