"""Latency, jitter, and throughput benchmarks over the middleware."""

from minidds.bench.errors import BenchConfigError, NoMatchWithinTimeout
from minidds.bench.latency import (DEFAULT_MATCH_TIMEOUT_S, ECHO_TOPIC,
                                   PING_TOPIC, run_latency, run_selftest)
from minidds.bench.payload import (MAX_PAYLOAD, MIN_PAYLOAD, PayloadShape,
                                   make_payload, read_header, shape_for)
from minidds.bench.reference import (REFERENCE_LABEL, TABLE1, TABLE2,
                                     TABLE2_SIZES, render_table1,
                                     render_table2)
from minidds.bench.stats import (CSV_COLUMNS, MODE_ONE_WAY, MODE_ROUND_TRIP,
                                 EmptyTrace, StatsSummary, TraceRecord,
                                 emit_csv, latencies_us, parse_csv,
                                 render_summary, stats)
from minidds.bench.throughput import (DEFAULT_DURATION_S, DEFAULT_SIZES,
                                      SizeResult, render_results,
                                      run_throughput)

__all__ = [
    "BenchConfigError",
    "CSV_COLUMNS",
    "DEFAULT_DURATION_S",
    "DEFAULT_MATCH_TIMEOUT_S",
    "DEFAULT_SIZES",
    "ECHO_TOPIC",
    "EmptyTrace",
    "MAX_PAYLOAD",
    "MIN_PAYLOAD",
    "MODE_ONE_WAY",
    "MODE_ROUND_TRIP",
    "NoMatchWithinTimeout",
    "PING_TOPIC",
    "PayloadShape",
    "REFERENCE_LABEL",
    "SizeResult",
    "StatsSummary",
    "TABLE1",
    "TABLE2",
    "TABLE2_SIZES",
    "TraceRecord",
    "emit_csv",
    "latencies_us",
    "make_payload",
    "parse_csv",
    "read_header",
    "render_results",
    "render_summary",
    "render_table1",
    "render_table2",
    "run_latency",
    "run_selftest",
    "run_throughput",
    "shape_for",
    "stats",
]
