"""Run results and their stable textual emissions.

One simulation run produces one report: per-flow outcomes with the exact
path taken, per-packet-in latency in ticks, a time series of rule
installations, and the controllers' event logs.  Emissions are byte-stable:
equal runs serialize identically, and the delimited form loads straight into
standard plotting tools.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

__all__ = ["FlowRecord", "InstallRecord", "LatencyRecord", "MetricsReport", "emit", "emit_series"]


@dataclass
class FlowRecord:
    index: int
    flow_id: str
    src: str
    dst: str
    request_tick: int
    outcome: str = "pending"  # delivered | dropped
    reason: str = ""
    drop_domain: str = ""
    delivered_tick: int = -1
    as_path: tuple[str, ...] = ()
    switch_path: tuple[str, ...] = ()
    from_flood: bool = False

    @property
    def establishment_ticks(self) -> int:
        if self.outcome != "delivered":
            return -1
        return self.delivered_tick - self.request_tick


@dataclass(frozen=True)
class LatencyRecord:
    domain: str
    arrival_tick: int
    start_tick: int
    emission_tick: int

    @property
    def latency(self) -> int:
        return self.emission_tick - self.arrival_tick

    @property
    def service_ticks(self) -> int:
        return self.emission_tick - self.start_tick


@dataclass(frozen=True)
class InstallRecord:
    tick: int
    domain: str
    src_ip: str
    flow_id: str
    rules: int
    provenance: str


@dataclass
class MetricsReport:
    scenario: str
    seed: int
    mode: str
    enforcement: bool
    window_ticks: int
    flows: list[FlowRecord] = field(default_factory=list)
    latencies: list[LatencyRecord] = field(default_factory=list)
    installs: list[InstallRecord] = field(default_factory=list)
    events: list[str] = field(default_factory=list)
    counters: dict[str, int] = field(default_factory=dict)

    # --- derived views -------------------------------------------------------

    def delivered(self) -> list[FlowRecord]:
        return [f for f in self.flows if f.outcome == "delivered"]

    def dropped(self) -> list[FlowRecord]:
        return [f for f in self.flows if f.outcome == "dropped"]

    def flow(self, src: str, dst: str) -> FlowRecord:
        for record in self.flows:
            if record.src == src and record.dst == dst:
                return record
        raise KeyError(f"no flow {src} -> {dst}")

    def mean_latency(self) -> float:
        if not self.latencies:
            return 0.0
        return sum(r.latency for r in self.latencies) / len(self.latencies)

    def established_within(self, horizon_tick: int) -> int:
        """Flow-mod batches emitted up to the horizon (saturation measure)."""
        return sum(1 for record in self.installs if record.tick <= horizon_tick)

    def installs_per_window(self, src_ip: str | None = None) -> dict[int, int]:
        out: dict[int, int] = {}
        for record in self.installs:
            if src_ip is not None and record.src_ip != src_ip:
                continue
            if record.provenance.startswith("defense:"):
                continue
            window = record.tick // self.window_ticks
            out[window] = out.get(window, 0) + 1
        return out

    def conservation_holds(self) -> bool:
        outcomes = {"delivered", "dropped"}
        return all(f.outcome in outcomes for f in self.flows)


_FLOW_COLUMNS = (
    "index",
    "flow_id",
    "src",
    "dst",
    "outcome",
    "reason",
    "drop_domain",
    "request_tick",
    "delivered_tick",
    "establishment_ticks",
    "as_path",
    "switch_path",
)


def _flow_row(record: FlowRecord) -> list[str]:
    return [
        str(record.index),
        record.flow_id,
        record.src,
        record.dst,
        record.outcome,
        record.reason,
        record.drop_domain,
        str(record.request_tick),
        str(record.delivered_tick),
        str(record.establishment_ticks),
        ">".join(record.as_path),
        ">".join(record.switch_path),
    ]


def emit(report: MetricsReport, fmt: str = "table") -> str:
    """Render a report as ``table`` (aligned), ``delimited`` (CSV with a
    header row) or ``records`` (JSON lines)."""
    if fmt == "records":
        lines = [
            json.dumps(
                {
                    "scenario": report.scenario,
                    "seed": report.seed,
                    "mode": report.mode,
                    "enforcement": report.enforcement,
                    "counters": report.counters,
                },
                sort_keys=True,
            )
        ]
        lines += [json.dumps(asdict(flow), sort_keys=True, default=str) for flow in report.flows]
        lines += [json.dumps(asdict(rec), sort_keys=True) for rec in report.installs]
        return "\n".join(lines) + "\n"
    rows = [_flow_row(flow) for flow in report.flows]
    if fmt == "delimited":
        out = [",".join(_FLOW_COLUMNS)]
        out += [",".join(row) for row in rows]
        out.append("")
        counter_items = sorted(report.counters.items())
        out.append("counter,value")
        out += [f"{name},{value}" for name, value in counter_items]
        return "\n".join(out) + "\n"
    if fmt != "table":
        raise ValueError(f"unknown emission format {fmt!r}")
    widths = [len(c) for c in _FLOW_COLUMNS]
    for row in rows:
        widths = [max(w, len(cell)) for w, cell in zip(widths, row)]
    header = "  ".join(c.ljust(w) for c, w in zip(_FLOW_COLUMNS, widths))
    lines = [f"scenario: {report.scenario}  seed={report.seed} mode={report.mode} enforcement={report.enforcement}"]
    lines.append(header)
    lines.append("-" * len(header))
    lines += ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in rows]
    lines.append("")
    for name, value in sorted(report.counters.items()):
        lines.append(f"{name}: {value}")
    return "\n".join(lines) + "\n"


def emit_series(series: dict[str, list[tuple[int, float]]], fmt: str = "delimited") -> str:
    """Render labeled (x, y) series, one column per label, x-aligned.

    Used for rate sweeps where several response policies are compared over
    the same offered-rate axis.
    """
    labels = list(series)
    xs = sorted({x for points in series.values() for x, _ in points})
    by_label = {label: dict(points) for label, points in series.items()}
    header = ["x"] + labels
    rows = [[str(x)] + [str(by_label[label].get(x, "")) for label in labels] for x in xs]
    if fmt == "delimited":
        return "\n".join([",".join(header)] + [",".join(row) for row in rows]) + "\n"
    if fmt == "table":
        widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
        out = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
        out += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in rows]
        return "\n".join(out) + "\n"
    if fmt == "records":
        out = [json.dumps({"x": x, **{label: by_label[label].get(x) for label in labels}}, sort_keys=True) for x in xs]
        return "\n".join(out) + "\n"
    raise ValueError(f"unknown emission format {fmt!r}")
