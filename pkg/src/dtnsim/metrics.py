"""Event accounting and the evaluation metrics.

The event log is the single source of truth: one line per event, and every
report is recomputed from events so a replayed log yields identical values.
Metrics are delivery ratio (delivered/created), average hop count summed
over delivered copies but normalized by created (the printed definition;
the conventional per-delivered average ships as a clearly labeled auxiliary
column) and overhead ratio (relayed - delivered)/delivered.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple


class Event(NamedTuple):
    time: float
    kind: str
    bundle_id: str
    from_eid: int | None
    to_eid: int | None
    hop: int | None


class EventLog:
    """Ordered event stream with running counters.

    Kinds: CREATED, RELAYED (completed transfer), DELIVERED (first arrival
    at the destination), DROPPED (buffer eviction), EXPIRED (TTL, once per
    bundle), PURGED (redundancy deletion), ABORTED (range exit or lost
    source copy). Counters are monotone over simulated time.
    """

    CREATED = "CREATED"
    RELAYED = "RELAYED"
    DELIVERED = "DELIVERED"
    DROPPED = "DROPPED"
    EXPIRED = "EXPIRED"
    PURGED = "PURGED"
    ABORTED = "ABORTED"

    def __init__(self) -> None:
        self.events: list[Event] = []
        self.created = 0
        self.relayed = 0
        self.delivered = 0
        self.delivered_bundles: set[str] = set()

    def record(
        self,
        time: float,
        kind: str,
        bundle_id: str,
        from_eid: int | None = None,
        to_eid: int | None = None,
        hop: int | None = None,
    ) -> None:
        self.events.append(Event(time, kind, bundle_id, from_eid, to_eid, hop))
        if kind == self.CREATED:
            self.created += 1
        elif kind == self.RELAYED:
            self.relayed += 1
        elif kind == self.DELIVERED:
            self.delivered += 1
            self.delivered_bundles.add(bundle_id)

    def lines(self) -> list[str]:
        """One event per line: time, kind, bundle id, node ids, hop count."""

        def cell(v) -> str:
            return "-" if v is None else str(v)

        return [
            f"{e.time:.3f} {e.kind} {e.bundle_id} {cell(e.from_eid)} "
            f"{cell(e.to_eid)} {cell(e.hop)}"
            for e in self.events
        ]

    def write(self, path) -> None:
        with open(path, "w") as fh:
            for line in self.lines():
                fh.write(line + "\n")

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "EventLog":
        log = cls()
        for raw in lines:
            raw = raw.strip()
            if not raw:
                continue
            t, kind, bid, frm, to, hop = raw.split()
            log.record(
                float(t),
                kind,
                bid,
                None if frm == "-" else int(frm),
                None if to == "-" else int(to),
                None if hop == "-" else int(hop),
            )
        return log


@dataclass(frozen=True)
class MetricsReport:
    delivery_ratio: float
    avg_hop_count: float
    avg_hop_per_delivered: float
    overhead_ratio: float | None  # None marks an undefined ratio (0 delivered)
    observed_max_hop: int
    created: int
    relayed: int
    delivered: int


def compute_report(log: EventLog) -> MetricsReport:
    """Fold an event log into the three evaluation metrics.

    Hop totals come from the DELIVERED events' hop counts (one per bundle);
    zero-denominator ratios become 0 (nothing created) or None (overhead
    with nothing delivered) rather than raising.
    """
    created = relayed = delivered = 0
    hop_sum = 0
    max_hop = 0
    for e in log.events:
        if e.kind == EventLog.CREATED:
            created += 1
        elif e.kind == EventLog.RELAYED:
            relayed += 1
        elif e.kind == EventLog.DELIVERED:
            delivered += 1
            hop_sum += e.hop or 0
            max_hop = max(max_hop, e.hop or 0)
    return MetricsReport(
        delivery_ratio=delivered / created if created else 0.0,
        avg_hop_count=hop_sum / created if created else 0.0,
        avg_hop_per_delivered=hop_sum / delivered if delivered else 0.0,
        overhead_ratio=(relayed - delivered) / delivered if delivered else None,
        observed_max_hop=max_hop,
        created=created,
        relayed=relayed,
        delivered=delivered,
    )


@dataclass(frozen=True)
class AggregateReport:
    """Cross-seed mean and sample deviation for one scenario point."""

    n_runs: int
    delivery_ratio_mean: float
    delivery_ratio_std: float
    avg_hop_count_mean: float
    avg_hop_count_std: float
    avg_hop_per_delivered_mean: float
    avg_hop_per_delivered_std: float
    overhead_ratio_mean: float | None
    overhead_ratio_std: float | None
    overhead_undefined_count: int
    observed_max_hop: int
    created_mean: float
    relayed_mean: float
    delivered_mean: float


def _mean_std(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def aggregate(reports: list[MetricsReport]) -> AggregateReport:
    """Average reports from one scenario point; undefined overheads are
    excluded from the overhead mean and counted separately."""
    if not reports:
        raise ValueError("cannot aggregate zero reports")
    dr = _mean_std([r.delivery_ratio for r in reports])
    hc = _mean_std([r.avg_hop_count for r in reports])
    hd = _mean_std([r.avg_hop_per_delivered for r in reports])
    defined = [r.overhead_ratio for r in reports if r.overhead_ratio is not None]
    ov = _mean_std(defined) if defined else (None, None)
    return AggregateReport(
        n_runs=len(reports),
        delivery_ratio_mean=dr[0],
        delivery_ratio_std=dr[1],
        avg_hop_count_mean=hc[0],
        avg_hop_count_std=hc[1],
        avg_hop_per_delivered_mean=hd[0],
        avg_hop_per_delivered_std=hd[1],
        overhead_ratio_mean=ov[0],
        overhead_ratio_std=ov[1],
        overhead_undefined_count=len(reports) - len(defined),
        observed_max_hop=max(r.observed_max_hop for r in reports),
        created_mean=sum(r.created for r in reports) / len(reports),
        relayed_mean=sum(r.relayed for r in reports) / len(reports),
        delivered_mean=sum(r.delivered for r in reports) / len(reports),
    )


# Fixed, documented column orders for the tabular outputs.
RUN_COLUMNS = [
    "protocol",
    "sweep_param",
    "sweep_value",
    "seed",
    "delivery_ratio",
    "avg_hop_count",
    "avg_hop_per_delivered",
    "overhead_ratio",
    "observed_max_hop",
    "created",
    "relayed",
    "delivered",
]

AGGREGATE_COLUMNS = [
    "protocol",
    "sweep_param",
    "sweep_value",
    "n_runs",
    "delivery_ratio_mean",
    "delivery_ratio_std",
    "avg_hop_count_mean",
    "avg_hop_count_std",
    "avg_hop_per_delivered_mean",
    "avg_hop_per_delivered_std",
    "overhead_ratio_mean",
    "overhead_ratio_std",
    "overhead_undefined_count",
    "observed_max_hop",
    "created_mean",
    "relayed_mean",
    "delivered_mean",
]


def fmt(value) -> str:
    """Stable cell formatting: empty for undefined, 6 decimals for floats."""
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def fmt_value(value) -> str:
    """Sweep-value cell: canonical shortest form, empty when not swept."""
    return "" if value is None else f"{value:g}"


def run_row(
    protocol: str, sweep_param: str, sweep_value, seed: int, report: MetricsReport
) -> list[str]:
    return [
        protocol,
        sweep_param,
        fmt_value(sweep_value),
        str(seed),
        fmt(report.delivery_ratio),
        fmt(report.avg_hop_count),
        fmt(report.avg_hop_per_delivered),
        fmt(report.overhead_ratio),
        str(report.observed_max_hop),
        str(report.created),
        str(report.relayed),
        str(report.delivered),
    ]


def aggregate_row(
    protocol: str, sweep_param: str, sweep_value, agg: AggregateReport
) -> list[str]:
    return [
        protocol,
        sweep_param,
        fmt_value(sweep_value),
        str(agg.n_runs),
        fmt(agg.delivery_ratio_mean),
        fmt(agg.delivery_ratio_std),
        fmt(agg.avg_hop_count_mean),
        fmt(agg.avg_hop_count_std),
        fmt(agg.avg_hop_per_delivered_mean),
        fmt(agg.avg_hop_per_delivered_std),
        fmt(agg.overhead_ratio_mean),
        fmt(agg.overhead_ratio_std),
        str(agg.overhead_undefined_count),
        str(agg.observed_max_hop),
        fmt(agg.created_mean),
        fmt(agg.relayed_mean),
        fmt(agg.delivered_mean),
    ]


def write_table(path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def read_table(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
