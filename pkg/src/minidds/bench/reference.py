"""Reference measurement tables printed beside live results.

The numbers come from an earlier two-node comparison of HLA and DDS
middleware on 2009-era hardware. They give a sense of scale, nothing
more: absolute values move with hardware, kernel, and middleware
versions, so reports label them as context and never treat them as
targets.
"""

from __future__ import annotations

from typing import Mapping, Optional

from minidds.bench.stats import StatsSummary

REFERENCE_LABEL = "reference (hardware-dependent, not a target)"

# Latency and jitter statistics in microseconds.
TABLE1 = {
    "HLA": {"latency_mean": 154.87, "latency_median": 138.93,
            "jitter_mean": 14.13, "jitter_median": 9.07},
    "DDS": {"latency_mean": 126.60, "latency_median": 106.00,
            "jitter_mean": 13.36, "jitter_median": 3.49},
}

# Throughput in Mb/s per payload size in bytes.
TABLE2_SIZES = (10, 100, 1000, 5000)
TABLE2 = {
    "HLA": (2, 30, 128, 350),
    "DDS": (6, 40, 112, 800),
}

_T1_ROWS = (
    ("latency mean", "latency_mean"),
    ("latency median", "latency_median"),
    ("jitter mean", "jitter_mean"),
    ("jitter median", "jitter_median"),
)


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.2f}"


def render_table1(summary: Optional[StatsSummary] = None) -> str:
    """Latency/jitter reference table, with measured and measured/DDS
    ratio columns when a summary is supplied."""
    lines = [f"latency and jitter (us), {REFERENCE_LABEL}"]
    header = f"{'':<16}{'HLA':>10}{'DDS':>10}"
    if summary is not None:
        header += f"{'measured':>12}{'vs DDS':>9}"
    lines.append(header)
    measured = None
    if summary is not None:
        measured = {
            "latency_mean": summary.latency_mean_us,
            "latency_median": summary.latency_median_us,
            "jitter_mean": summary.jitter_mean_us,
            "jitter_median": summary.jitter_median_us,
        }
    for label, key in _T1_ROWS:
        line = (f"{label:<16}{TABLE1['HLA'][key]:>10.2f}"
                f"{TABLE1['DDS'][key]:>10.2f}")
        if measured is not None:
            value = measured[key]
            line += f"{_fmt(value):>12}"
            ratio = None if value is None else value / TABLE1["DDS"][key]
            line += f"{_fmt(ratio):>9}"
        lines.append(line)
    return "\n".join(lines)


def render_table2(measured: Optional[Mapping[int, float]] = None) -> str:
    """Throughput-per-size reference table; ``measured`` maps requested
    payload size to Mb/s."""
    lines = [f"throughput (Mb/s) per payload size (B), {REFERENCE_LABEL}"]
    lines.append("".join([f"{'size':<14}"] +
                         [f"{size:>10}" for size in TABLE2_SIZES]))
    for system in ("HLA", "DDS"):
        lines.append("".join(
            [f"{system:<14}"] +
            [f"{value:>10}" for value in TABLE2[system]]))
    if measured is not None:
        row, ratio_row = [f"{'measured':<14}"], [f"{'vs DDS':<14}"]
        for size, dds in zip(TABLE2_SIZES, TABLE2["DDS"]):
            value = measured.get(size)
            row.append(f"{_fmt(value):>10}")
            ratio_row.append(
                f"{_fmt(None if value is None else value / dds):>10}")
        lines.append("".join(row))
        lines.append("".join(ratio_row))
    return "\n".join(lines)
