"""Scenario files, presets, experiment sweeps and result emission.

Scenario files are line-oriented key=value with the standard parameter
names in snake_case (number_of_nodes, world_size, tickets_in_binary_sw,
message_ttl, simulation_time, message_size, node_buffer_size,
transmission_range, node_moving_speed, movement_model, message_interval,
transmission_speed) plus the engine knobs clock_step, hello_interval,
seed, protocol, walk_leg_min and walk_leg_max. Values may carry the
parameter's unit as a suffix (node_buffer_size=2MB). Omitted keys take
the defaults; unknown keys are hard errors.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from . import metrics
from .engine import PROTOCOLS, Scenario, ScenarioError, run


class ConfigError(ValueError):
    pass


def _number(raw: str, key: str, units: tuple[str, ...]) -> float:
    m = re.fullmatch(r"\s*([-+0-9.eE]+)\s*([^\s]*)\s*", raw)
    if not m:
        raise ConfigError(f"unparsable value for {key}: {raw!r}")
    num, unit = m.groups()
    if unit and unit not in units:
        raise ConfigError(f"bad unit for {key}: {unit!r} (expected one of {units or '()'})")
    try:
        return float(num)
    except ValueError as exc:
        raise ConfigError(f"unparsable value for {key}: {raw!r}") from exc


def _int(raw: str, key: str, units: tuple[str, ...] = ()) -> int:
    v = _number(raw, key, units)
    if v != int(v):
        raise ConfigError(f"{key} must be an integer, got {raw!r}")
    return int(v)


# key -> function(raw value) -> dict of Scenario field updates
_KEYS = {
    "number_of_nodes": lambda v: {"node_count": _int(v, "number_of_nodes")},
    "world_size": lambda v: {
        "world_width": _number(v, "world_size", ("m2", "m^2", "m²", "m")),
        "world_height": _number(v, "world_size", ("m2", "m^2", "m²", "m")),
    },
    "tickets_in_binary_sw": lambda v: {"snw_tickets": _int(v, "tickets_in_binary_sw")},
    "message_ttl": lambda v: {"ttl": _number(v, "message_ttl", ("min",)) * 60.0},
    "simulation_time": lambda v: {
        "sim_duration": _number(v, "simulation_time", ("h", "hours")) * 3600.0
    },
    "message_size": lambda v: {"message_size": int(_number(v, "message_size", ("KB",)) * 1000)},
    "node_buffer_size": lambda v: {
        "buffer_size": int(_number(v, "node_buffer_size", ("MB",)) * 1_000_000)
    },
    "transmission_range": lambda v: {"radius_R": _number(v, "transmission_range", ("m",))},
    "node_moving_speed": lambda v: {
        "node_speed": _number(v, "node_moving_speed", ("m/s", "mps"))
    },
    "movement_model": lambda v: {"movement_model": v.strip()},
    "message_interval": lambda v: {"message_interval": _number(v, "message_interval", ("s",))},
    "transmission_speed": lambda v: {
        "bandwidth": _number(v, "transmission_speed", ("KBps",)) * 1000.0
    },
    "clock_step": lambda v: {"clock_step": _number(v, "clock_step", ("s",))},
    "hello_interval": lambda v: {"hello_interval": _number(v, "hello_interval", ("s",))},
    "seed": lambda v: {"seed": _int(v, "seed")},
    "protocol": lambda v: {"protocol": v.strip()},
    "walk_leg_min": lambda v: {"walk_leg_min": _number(v, "walk_leg_min", ("m",))},
    "walk_leg_max": lambda v: {"walk_leg_max": _number(v, "walk_leg_max", ("m",))},
}


def parse_scenario(path) -> Scenario:
    """Read a scenario file; defaults fill omitted keys, unknown keys raise."""
    updates: dict = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            updates.update(_KEYS[key](value.strip()))
    model = updates.pop("movement_model", "random_walk")
    if model.lower().replace(" ", "_") != "random_walk":
        raise ConfigError(f"unsupported movement_model {model!r} (only random_walk)")
    leg_min = updates.pop("walk_leg_min", None)
    leg_max = updates.pop("walk_leg_max", None)
    scenario = Scenario(**updates)
    if leg_min is not None or leg_max is not None:
        lo, hi = scenario.walk_leg_range
        scenario = replace(
            scenario,
            walk_leg_range=(leg_min if leg_min is not None else lo,
                            leg_max if leg_max is not None else hi),
        )
    try:
        scenario.validate()
    except ScenarioError as exc:
        raise ConfigError(str(exc)) from exc
    return scenario


def desk_preset() -> Scenario:
    """Reduced scenario (40 nodes, 500 m square, 1 h) for fast experiments;
    node density and all other settings keep the full preset's proportions."""
    return Scenario(node_count=40, world_width=500.0, world_height=500.0,
                    sim_duration=3600.0)


def full_preset() -> Scenario:
    return Scenario()


# swept parameter -> (scenario field, CLI/table unit, converter to SI)
SWEEP_PARAMS = {
    "message_interval": ("message_interval", "s", lambda v: float(v)),
    "buffer_size": ("buffer_size", "MB", lambda v: int(float(v) * 1_000_000)),
    "node_speed": ("node_speed", "m/s", lambda v: float(v)),
    "radius_R": ("radius_R", "m", lambda v: float(v)),
    "node_count": ("node_count", "", lambda v: int(v)),
    "sim_duration": ("sim_duration", "hours", lambda v: float(v) * 3600.0),
}


@dataclass(frozen=True)
class SweepSpec:
    """One experiment axis: a base scenario, the parameter to vary, its
    values (strictly increasing, in table units) and the seeds to average."""

    base: Scenario
    swept_parameter: str | None
    values: list
    seeds: list[int]

    def validate(self) -> None:
        if self.swept_parameter is not None and self.swept_parameter not in SWEEP_PARAMS:
            raise ConfigError(f"unknown sweep parameter {self.swept_parameter!r}")
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        if self.swept_parameter is not None and any(
            b <= a for a, b in zip(self.values, self.values[1:])
        ):
            raise ConfigError("sweep values must be strictly increasing")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be non-empty and distinct")


def _point_scenario(base: Scenario, param: str | None, value, protocol: str, seed: int) -> Scenario:
    updates = {"protocol": protocol, "seed": seed}
    if param is not None:
        fld, _, conv = SWEEP_PARAMS[param]
        updates[fld] = conv(value)
    return replace(base, **updates)


def _run_one(args):
    """Worker for one (protocol, value, seed) point; returns a row or error."""
    index, scenario, log_path = args
    try:
        log = run(scenario)
        if log_path is not None:
            log.write(log_path)
        return index, metrics.compute_report(log), None
    except Exception as exc:  # propagated via the failure manifest
        return index, None, f"{type(exc).__name__}: {exc}"


def run_sweep(
    spec: SweepSpec,
    output_dir,
    protocols: list[str] | None = None,
    verbose_logs: bool = False,
    parallel: int = 1,
) -> dict:
    """Execute |protocols| x |values| x |seeds| independent runs and write
    the per-run and aggregated tables (runs_<param>.csv, aggregate_<param>.csv).
    Partial results are flushed alongside a failure manifest if any run dies.
    """
    spec.validate()
    protocols = protocols or [spec.base.protocol]
    for p in protocols:
        if p not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {p!r}")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    param = spec.swept_parameter
    param_name = param or "none"

    jobs = []
    keys = []
    for protocol in protocols:
        for value in spec.values:
            for seed in spec.seeds:
                scenario = _point_scenario(spec.base, param, value, protocol, seed)
                log_path = None
                if verbose_logs:
                    tag = "" if value is None else f"_{value:g}"
                    log_path = out / f"events_{protocol}_{param_name}{tag}_seed{seed}.log"
                jobs.append((len(jobs), scenario, log_path))
                keys.append((protocol, value, seed))

    results: list = [None] * len(jobs)
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            for index, report, error in pool.map(_run_one, jobs):
                results[index] = (report, error)
    else:
        for job in jobs:
            index, report, error = _run_one(job)
            results[index] = (report, error)

    run_rows = []
    failures = []
    by_point: dict = {}
    for (protocol, value, seed), (report, error) in zip(keys, results):
        if error is not None:
            failures.append({"protocol": protocol, "value": value, "seed": seed,
                             "error": error})
            continue
        run_rows.append(metrics.run_row(protocol, param_name, value, seed, report))
        by_point.setdefault((protocol, value), []).append(report)

    agg_rows = [
        metrics.aggregate_row(protocol, param_name, value, metrics.aggregate(reports))
        for (protocol, value), reports in by_point.items()
    ]
    runs_path = out / f"runs_{param_name}.csv"
    agg_path = out / f"aggregate_{param_name}.csv"
    metrics.write_table(runs_path, metrics.RUN_COLUMNS, run_rows)
    metrics.write_table(agg_path, metrics.AGGREGATE_COLUMNS, agg_rows)
    if failures:
        with open(out / "failures.json", "w") as fh:
            json.dump(failures, fh, indent=2)
    return {
        "runs_table": runs_path,
        "aggregate_table": agg_path,
        "n_runs": len(run_rows),
        "failures": failures,
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dtnsim",
        description="Delay-tolerant MANET routing simulator (GRONE, Epidemic, "
        "Binary Spray & Wait, FirstContact, Direct Delivery).",
    )
    parser.add_argument("--scenario", help="scenario file (key=value lines)")
    parser.add_argument("--preset", choices=["desk", "full"],
                        help="built-in scenario: desk (40 nodes, 1 h) or full (120 nodes, 5 h)")
    parser.add_argument("--protocols", default=None,
                        help="comma-separated protocols (default: scenario's)")
    parser.add_argument("--sweep", choices=sorted(SWEEP_PARAMS), default=None,
                        help="parameter to vary")
    parser.add_argument("--values", default=None,
                        help="comma-separated sweep values (table units: s, MB, m/s, m, count, hours)")
    parser.add_argument("--seeds", default="1,2,3,4,5",
                        help="comma-separated seeds (default 1..5)")
    parser.add_argument("--output", default=None,
                        help="output directory (or $DTNSIM_OUTPUT_DIR, default ./results)")
    parser.add_argument("--event-logs", action="store_true",
                        help="write one replayable event log per run")
    parser.add_argument("--parallel", type=int, default=1,
                        help="concurrent runs (each run stays single-threaded)")
    args = parser.parse_args(argv)

    try:
        if args.scenario and args.preset:
            raise ConfigError("give either --scenario or --preset, not both")
        if args.scenario:
            base = parse_scenario(args.scenario)
        elif args.preset == "full":
            base = full_preset()
        else:
            base = desk_preset()
        if args.sweep and not args.values:
            raise ConfigError("--sweep requires --values")
        values = (
            [float(v) for v in args.values.split(",")] if args.values else [None]
        )
        seeds = [int(s) for s in args.seeds.split(",")]
        protocols = args.protocols.split(",") if args.protocols else None
        output = args.output or os.environ.get("DTNSIM_OUTPUT_DIR") or "results"
        spec = SweepSpec(base=base, swept_parameter=args.sweep, values=values,
                         seeds=seeds)
        result = run_sweep(spec, output, protocols=protocols,
                           verbose_logs=args.event_logs, parallel=args.parallel)
    except (ConfigError, ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{result['n_runs']} runs -> {result['runs_table']}")
    print(f"aggregated -> {result['aggregate_table']}")
    if result["failures"]:
        print(f"{len(result['failures'])} runs failed; see failures.json",
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
