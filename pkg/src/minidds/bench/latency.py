"""Round-trip latency measurement.

Two processes cooperate: the ping role publishes timestamped samples at
a fixed rate and subscribes to their reflections, the echo role reflects
every sample it sees. Both stamps in a trace record come from the ping
process's monotonic clock, so one-way latency is taken as half the round
trip with no clock synchronization involved. A selftest variant runs
both roles in one process over the in-process transport.
"""

from __future__ import annotations

import time
from typing import Callable, Iterable, Mapping, Optional

from minidds import qos
from minidds.bench.errors import BenchConfigError, NoMatchWithinTimeout
from minidds.bench.payload import (PayloadShape, make_payload, read_header,
                                   shape_for)
from minidds.bench.stats import (MODE_ROUND_TRIP, StatsSummary, TraceRecord,
                                 stats)
from minidds.dcps import DomainParticipant

PING_TOPIC = "bench.latency.ping"
ECHO_TOPIC = "bench.latency.echo"
DEFAULT_MATCH_TIMEOUT_S = 10.0
_DRAIN_GRACE_S = 2.0
_IDLE_TIMEOUT_S = 30.0
# Echo batches can pile up between takes; a deep reader keeps a burst
# from evicting unread reflections.
_READER_DEPTH = 256

QosSettings = Optional[Mapping[qos.QosPolicyId, object]]


def _endpoint_qos(settings: QosSettings):
    """(topic, writer, reader) policy maps from one settings file."""
    given = dict(settings or {})
    topic = qos.settings_for(given, frozenset({qos.EntityKind.TOPIC}))
    writer = qos.settings_for(given, frozenset({qos.EntityKind.DATA_WRITER}))
    reader = {qos.QosPolicyId.HISTORY:
              qos.History(qos.HistoryKind.KEEP_LAST, _READER_DEPTH)}
    reader.update(
        qos.settings_for(given, frozenset({qos.EntityKind.DATA_READER})))
    return topic, writer, reader


def _build(role: str, shape: PayloadShape, settings: QosSettings, *,
           domain_id: int, port: Optional[int], bind_host: str,
           peers: Iterable, transport=None):
    """One participant with this role's writer and reader attached."""
    topic_qos, writer_qos, reader_qos = _endpoint_qos(settings)
    participant = DomainParticipant(domain_id, transport=transport,
                                    port=port, bind_host=bind_host,
                                    static_peers=peers)
    try:
        ping_topic = participant.create_topic(PING_TOPIC, shape.descriptor,
                                              dict(topic_qos))
        echo_topic = participant.create_topic(ECHO_TOPIC, shape.descriptor,
                                              dict(topic_qos))
        out_topic = ping_topic if role == "ping" else echo_topic
        in_topic = echo_topic if role == "ping" else ping_topic
        writer = participant.create_datawriter(out_topic, dict(writer_qos))
        reader = participant.create_datareader(in_topic, dict(reader_qos))
    except Exception:
        participant.close()
        raise
    return participant, writer, reader


def _await_match(participant: DomainParticipant, endpoints, timeout_s: float,
                 spin: Callable[[], None]) -> None:
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        if all(e.matches() for e in endpoints):
            return
        spin()
    unmatched = [e.descriptor.topic_name for e in endpoints if not e.matches()]
    raise NoMatchWithinTimeout(
        f"no match on {', '.join(unmatched)} within {timeout_s:g} s",
        participant.incompatible_qos)


def run_latency(role: str, *, payload_size: int = 100, rate_hz: float = 100.0,
                count: int = 1000, qos_settings: QosSettings = None,
                domain_id: int = 0, port: Optional[int] = None,
                bind_host: str = "0.0.0.0", peers: Iterable = (),
                match_timeout_s: float = DEFAULT_MATCH_TIMEOUT_S,
                idle_timeout_s: float = _IDLE_TIMEOUT_S):
    """Run one latency role over UDP.

    The ping role returns ``(trace, StatsSummary)``; the echo role
    reflects up to ``count`` samples and returns how many it reflected.
    """
    if role not in ("ping", "echo"):
        raise BenchConfigError(f"role must be ping or echo, not {role!r}")
    if rate_hz <= 0:
        raise BenchConfigError("rate must be positive")
    if count <= 0:
        raise BenchConfigError("count must be positive")
    shape = shape_for(payload_size)
    participant, writer, reader = _build(
        role, shape, qos_settings, domain_id=domain_id, port=port,
        bind_host=bind_host, peers=peers)
    try:
        participant.start()
        if role == "ping":
            return _drive_ping(participant, writer, reader, shape,
                               rate_hz, count, match_timeout_s,
                               spin=lambda: time.sleep(0.01))
        return _drive_echo(participant, writer, reader, count,
                           match_timeout_s, idle_timeout_s)
    finally:
        participant.close()


def _drive_ping(participant, writer, reader, shape, rate_hz, count,
                match_timeout_s, spin, extra_spin=None):
    clock = participant.clock
    records: dict[int, TraceRecord] = {}

    def on_echo(rd):
        now = clock.monotonic_ns()
        for sample, _info in rd.take():
            seq, t_send = read_header(sample)
            # First reflection wins; a duplicate would inflate latency.
            records.setdefault(seq, TraceRecord(seq, t_send, now, shape.size))

    reader.listener = on_echo
    _await_match(participant, (writer, reader), match_timeout_s, spin)
    interval = 1.0 / rate_hz
    next_send = time.monotonic()
    for seq in range(1, count + 1):
        writer.write(make_payload(shape, seq, clock.monotonic_ns()))
        next_send += interval
        while True:
            if extra_spin is not None:
                extra_spin()
            delay = next_send - time.monotonic()
            if delay <= 0:
                break
            time.sleep(min(delay, 0.002) if extra_spin else delay)
    grace = time.monotonic() + _DRAIN_GRACE_S
    while len(records) < count and time.monotonic() < grace:
        spin()
    trace = [records[seq] for seq in sorted(records)]
    return trace, stats(trace, mode=MODE_ROUND_TRIP, expected=count)


def _drive_echo(participant, writer, reader, limit, match_timeout_s,
                idle_timeout_s):
    state = {"echoed": 0, "last": time.monotonic()}

    def on_ping(rd):
        for sample, _info in rd.take():
            writer.write(sample)
            state["echoed"] += 1
        state["last"] = time.monotonic()

    reader.listener = on_ping
    _await_match(participant, (writer, reader), match_timeout_s,
                 spin=lambda: time.sleep(0.01))
    while (state["echoed"] < limit
           and time.monotonic() - state["last"] < idle_timeout_s):
        time.sleep(0.01)
    return state["echoed"]


def run_selftest(*, payload_size: int = 100, rate_hz: float = 200.0,
                 count: int = 200, qos_settings: QosSettings = None):
    """Both roles in one process over the in-process transport; returns
    the ping side's ``(trace, StatsSummary)``."""
    from minidds.rtps.transport import InProcNetwork

    if rate_hz <= 0:
        raise BenchConfigError("rate must be positive")
    if count <= 0:
        raise BenchConfigError("count must be positive")
    shape = shape_for(payload_size)
    net = InProcNetwork()
    ping_p, ping_w, ping_r = _build(
        "ping", shape, qos_settings, domain_id=0, port=None,
        bind_host="", peers=("echo",), transport=net.attach("ping"))
    echo_p, echo_w, echo_r = _build(
        "echo", shape, qos_settings, domain_id=0, port=None,
        bind_host="", peers=("ping",), transport=net.attach("echo"))

    def on_ping(rd):
        for sample, _info in rd.take():
            echo_w.write(sample)

    echo_r.listener = on_ping

    def spin():
        for _ in range(4):
            ping_p.spin_once()
            echo_p.spin_once()
        time.sleep(0.0002)

    try:
        _await_match(ping_p, (ping_w, ping_r, echo_w, echo_r),
                     DEFAULT_MATCH_TIMEOUT_S, spin)
        return _drive_ping(ping_p, ping_w, ping_r, shape, rate_hz, count,
                           DEFAULT_MATCH_TIMEOUT_S, spin,
                           extra_spin=lambda: (ping_p.spin_once(),
                                               echo_p.spin_once()))
    finally:
        ping_p.close()
        echo_p.close()
