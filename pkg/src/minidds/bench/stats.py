"""Trace records, latency/jitter summaries, and the trace CSV format.

A trace is what one benchmark run leaves behind: per-sequence send and
receive stamps from a single monotonic clock. Latency is derived per
record, halved when the stamps span a round trip; jitter is the absolute
difference between consecutive latencies in sequence order. Means are
arithmetic; medians take the lower middle element for even counts.
"""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass
from typing import Iterable, Optional

MODE_ROUND_TRIP = "round-trip/2"
MODE_ONE_WAY = "one-way"
_MODES = (MODE_ROUND_TRIP, MODE_ONE_WAY)

CSV_COLUMNS = ("seq", "t_send_ns", "t_recv_ns", "payload_size")
_MODE_PREFIX = "# latency-mode: "


class EmptyTrace(Exception):
    """Statistics asked of a trace with no records."""


@dataclass(frozen=True)
class TraceRecord:
    sequence: int
    t_send_ns: int
    t_recv_ns: int
    payload_size: int

    def __post_init__(self):
        if self.t_recv_ns < self.t_send_ns:
            raise ValueError(
                f"sequence {self.sequence}: t_recv {self.t_recv_ns} precedes "
                f"t_send {self.t_send_ns} on the same clock")


@dataclass(frozen=True)
class StatsSummary:
    """Location and dispersion of one run, in microseconds.

    Jitter needs two records; with fewer, its fields are None.
    """

    latency_mean_us: float
    latency_median_us: float
    jitter_mean_us: Optional[float]
    jitter_median_us: Optional[float]
    sample_count: int
    loss_count: int


def latencies_us(trace: Iterable[TraceRecord],
                 mode: str = MODE_ROUND_TRIP) -> list[float]:
    """Per-record latency in sequence order."""
    if mode not in _MODES:
        raise ValueError(f"unknown latency mode {mode!r}")
    halve = 2.0 if mode == MODE_ROUND_TRIP else 1.0
    ordered = sorted(trace, key=lambda r: r.sequence)
    return [(r.t_recv_ns - r.t_send_ns) / halve / 1000.0 for r in ordered]


def stats(trace: Iterable[TraceRecord], *, mode: str = MODE_ROUND_TRIP,
          expected: Optional[int] = None) -> StatsSummary:
    """Summarize a trace; raises ``EmptyTrace`` with no records.

    ``expected`` is the number of samples sent; when given, the shortfall
    against the trace length becomes the loss count.
    """
    lat = latencies_us(trace, mode)
    if not lat:
        raise EmptyTrace("no trace records")
    jitter = [abs(b - a) for a, b in zip(lat, lat[1:])]
    loss = max(0, expected - len(lat)) if expected is not None else 0
    return StatsSummary(
        latency_mean_us=statistics.fmean(lat),
        latency_median_us=statistics.median_low(lat),
        jitter_mean_us=statistics.fmean(jitter) if jitter else None,
        jitter_median_us=statistics.median_low(jitter) if jitter else None,
        sample_count=len(lat),
        loss_count=loss,
    )


def render_summary(summary: StatsSummary) -> str:
    """Four metric lines, microseconds, n/a where jitter is undefined."""

    def fmt(value: Optional[float]) -> str:
        return "n/a" if value is None else f"{value:.2f}"

    return "\n".join([
        f"latency mean (us)    {fmt(summary.latency_mean_us)}",
        f"latency median (us)  {fmt(summary.latency_median_us)}",
        f"jitter mean (us)     {fmt(summary.jitter_mean_us)}",
        f"jitter median (us)   {fmt(summary.jitter_median_us)}",
    ])


def emit_csv(trace: Iterable[TraceRecord],
             mode: str = MODE_ROUND_TRIP) -> str:
    """Render a trace with the latency mode flagged in the header."""
    if mode not in _MODES:
        raise ValueError(f"unknown latency mode {mode!r}")
    out = io.StringIO()
    out.write(f"{_MODE_PREFIX}{mode}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for record in trace:
        writer.writerow((record.sequence, record.t_send_ns,
                         record.t_recv_ns, record.payload_size))
    return out.getvalue()


def parse_csv(text: str) -> tuple[list[TraceRecord], str]:
    """Inverse of ``emit_csv``: the records and the flagged mode."""
    mode = MODE_ROUND_TRIP
    rows: list[str] = []
    for line in text.splitlines():
        if line.startswith(_MODE_PREFIX):
            mode = line[len(_MODE_PREFIX):].strip()
            if mode not in _MODES:
                raise ValueError(f"unknown latency mode {mode!r}")
        elif line.startswith("#") or not line.strip():
            continue
        else:
            rows.append(line)
    reader = csv.reader(rows)
    header = next(reader, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise ValueError(f"expected header {','.join(CSV_COLUMNS)!r}")
    trace = []
    for row in reader:
        if len(row) != len(CSV_COLUMNS):
            raise ValueError(f"expected {len(CSV_COLUMNS)} columns, got {row!r}")
        seq, t_send, t_recv, size = (int(cell) for cell in row)
        trace.append(TraceRecord(seq, t_send, t_recv, size))
    return trace, mode
