"""Trace file layouts and per-phase latency statistics."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .net import PHASES, LatencyReport

OCCUPANCY_COLUMNS = ("stamp", "segment", "count", "occupancy")
LATENCY_COLUMNS = ("request_id", "probe", "emitted_at", "captured_at", "received_at",
                   *PHASES, "total", "budget", "within_budget", "outcome")
ROUTE_COLUMNS = ("decided_at", "request_id", "probe", "snapshot_stamp", "kind", "segments",
                 "total_length", "max_occupancy", "cost")
STAT_ROWS = (*PHASES, "total")


def fmt(x: float) -> str:
    return f"{x:.6f}"


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def latency_row(report: LatencyReport, probe: bool, outcome: str) -> list[str]:
    return [str(report.request_id), str(int(probe)), fmt(report.emitted_at),
            fmt(report.captured_at), fmt(report.received_at),
            *(fmt(getattr(report, p)) for p in PHASES), fmt(report.total), fmt(report.budget),
            str(int(report.within_budget)), outcome]


@dataclass(frozen=True)
class Stats:
    n: int
    min: float
    avg: float
    max: float
    mean_dev: float

    @classmethod
    def of(cls, values: Sequence[float]) -> "Stats":
        if not values:
            raise ValueError("no values")
        avg = sum(values) / len(values)
        dev = sum(abs(v - avg) for v in values) / len(values)
        # clamp rounding noise so min <= avg <= max always holds
        return cls(len(values), min(values), min(max(avg, min(values)), max(values)),
                   max(values), dev)


class EmptyInput(ValueError):
    pass


def summarize(source: str | Path | Iterable[Mapping[str, str]]) -> dict[str, Stats]:
    """Min / avg / max / mean absolute deviation per phase and for the total.

    ``source`` is a latency CSV path or an iterable of its rows as dicts.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            rows = list(csv.DictReader(fh))
    else:
        rows = list(source)
    if not rows:
        raise EmptyInput("latency trace has no rows")
    try:
        return {name: Stats.of([float(r[name]) for r in rows]) for name in STAT_ROWS}
    except (KeyError, ValueError) as exc:
        raise ValueError(f"malformed latency trace: {exc}") from None


def format_table(stats: Mapping[str, Stats], unit: float = 1e3) -> str:
    """Render per-phase stats as a fixed-width table in milliseconds."""
    labels = {"edge_compute": "Edge comp.", "upload": "Upload", "cloud_compute": "Cloud comp.",
              "download": "Download", "total": "Total"}
    out = io.StringIO()
    out.write(f"{'':<12}{'Min':>10}{'Avg.':>10}{'Max':>10}{'Mean dev.':>11}   (ms)\n")
    for name, s in stats.items():
        out.write(f"{labels.get(name, name):<12}{s.min * unit:>10.3f}{s.avg * unit:>10.3f}"
                  f"{s.max * unit:>10.3f}{s.mean_dev * unit:>11.3f}\n")
    return out.getvalue()


@dataclass
class RunSummary:
    latency: dict[str, Stats] = field(default_factory=dict)
    routes: list[dict] = field(default_factory=list)
    adopted_route: list[str] | None = None
    budget_violations: list[dict] = field(default_factory=list)
    requests: int = 0
    responses: int = 0
    dropped_messages: int = 0
    retransmissions: int = 0
    late_uploads: int = 0
    late_detections: int = 0
    spawned: int = 0
    removed: int = 0
    ego_arrived_at: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        return _round(d)

    def write(self, path: Path):
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def _round(obj):
    if isinstance(obj, float):
        return round(obj, 6)
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj
