"""Throughput measurement: saturating writes, received bits over time.

One process hosts both sides on the UDP loopback: a writer publishes as
fast as the loop allows for a fixed interval per payload size, a reader
on a second participant counts what actually arrives. Throughput is
received payload bits divided by the interval, so kernel or receiver
drops lower the number instead of hiding behind it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterable, Optional

from minidds import qos
from minidds.bench.errors import BenchConfigError
from minidds.bench.latency import _await_match, _endpoint_qos
from minidds.bench.payload import make_payload, shape_for
from minidds.dcps import DomainParticipant

DEFAULT_SIZES = (10, 100, 1000, 5000)
DEFAULT_DURATION_S = 1.0
_TOPIC_PREFIX = "bench.throughput."
_SETTLE_GRACE_S = 0.2


@dataclass(frozen=True)
class SizeResult:
    requested_size: int
    payload_size: int
    duration_s: float
    sent: int
    received: int

    @property
    def mbits_per_s(self) -> float:
        return self.received * self.payload_size * 8 / self.duration_s / 1e6

    @property
    def samples_per_s(self) -> float:
        return self.received / self.duration_s

    @property
    def loss_fraction(self) -> float:
        return 0.0 if self.sent == 0 else (self.sent - self.received) / self.sent


def run_throughput(sizes: Iterable[int] = DEFAULT_SIZES,
                   duration_s: float = DEFAULT_DURATION_S, *,
                   qos_settings=None, domain_id: int = 0,
                   bind_host: str = "127.0.0.1",
                   base_port: Optional[int] = None,
                   match_timeout_s: float = 10.0) -> list[SizeResult]:
    """Measure each payload size for ``duration_s`` on the loopback."""
    sizes = tuple(sizes)
    if not sizes:
        raise BenchConfigError("no payload sizes given")
    if duration_s <= 0:
        raise BenchConfigError("duration must be positive")
    shapes = [shape_for(size) for size in sizes]
    topic_qos, writer_qos, reader_qos = _endpoint_qos(qos_settings)
    # Saturation with unbounded history would block the send loop on the
    # slower receiver, so both caches stay shallow unless overridden.
    writer_qos.setdefault(qos.QosPolicyId.HISTORY,
                          qos.History(qos.HistoryKind.KEEP_LAST, 1))
    send_port = base_port
    recv_port = None if base_port is None else base_port + 100
    sender = DomainParticipant(domain_id, port=send_port, bind_host=bind_host)
    receiver = DomainParticipant(
        domain_id, port=recv_port, bind_host=bind_host,
        static_peers=[(bind_host, sender.transport.port)])
    results: list[SizeResult] = []
    try:
        sender.start()
        receiver.start()
        for shape in shapes:
            name = f"{_TOPIC_PREFIX}{shape.size}"
            writer = sender.create_datawriter(
                sender.create_topic(name, shape.descriptor, dict(topic_qos)),
                dict(writer_qos))
            reader = receiver.create_datareader(
                receiver.create_topic(name, shape.descriptor, dict(topic_qos)),
                dict(reader_qos))
            _await_match(receiver, (writer, reader), match_timeout_s,
                         spin=lambda: time.sleep(0.005))
            payload = make_payload(shape, 0, 0)
            sent = 0
            end = time.monotonic() + duration_s
            while time.monotonic() < end:
                writer.write(payload)
                sent += 1
            time.sleep(_SETTLE_GRACE_S)
            received = reader.statistics().samples_accepted
            results.append(SizeResult(
                requested_size=shape.requested, payload_size=shape.size,
                duration_s=duration_s, sent=sent, received=received))
            writer.close()
            reader.close()
    finally:
        sender.close()
        receiver.close()
    return results


def render_results(results: Iterable[SizeResult]) -> str:
    lines = [f"{'size (B)':>10}{'Mb/s':>12}{'samples/s':>14}"
             f"{'sent':>10}{'received':>10}{'loss':>8}"]
    for r in results:
        note = " (padded)" if r.payload_size != r.requested_size else ""
        lines.append(
            f"{r.requested_size:>10}{r.mbits_per_s:>12.2f}"
            f"{r.samples_per_s:>14.0f}{r.sent:>10}{r.received:>10}"
            f"{r.loss_fraction:>8.1%}{note}")
    return "\n".join(lines)
