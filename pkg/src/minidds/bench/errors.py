"""Failure modes shared by the benchmark front ends."""

from __future__ import annotations


class BenchConfigError(Exception):
    """A benchmark parameter that cannot be run (rate 0, oversized
    payload, and similar)."""


class NoMatchWithinTimeout(Exception):
    """Discovery never produced a matched writer/reader pair.

    ``reports`` holds any (writer guid, reader guid, CompatibilityReport)
    triples recorded while waiting, so the caller can show why nearby
    endpoints were turned down.
    """

    def __init__(self, message: str, reports=()):
        super().__init__(message)
        self.reports = tuple(reports)
