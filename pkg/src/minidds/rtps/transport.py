"""Datagram transports: real UDP sockets and an in-process test network.

Both expose the same small surface: ``send`` a datagram to an address,
``drain`` whatever has arrived, ``wait`` for readability. Addresses are
``(host, port)`` tuples for UDP and plain strings for the in-process hub.

The in-process network injects faults (drop, duplicate, bounded reorder)
from a seeded generator, so a given seed and send sequence always yields
the same delivery schedule.
"""

from __future__ import annotations

import logging
import random
import select
import socket
import struct
from dataclasses import dataclass

log = logging.getLogger(__name__)

BASE_PORT = 7400
PORT_RETRIES = 16
DEFAULT_MULTICAST_GROUP = "239.255.0.1"


class TransportError(Exception):
    pass


def default_port(domain_id: int) -> int:
    return BASE_PORT + domain_id


class UdpTransport:
    """Non-blocking UDP socket bound to the domain's port range.

    If the preferred port (7400 + domain_id) is taken, the next 16 ports
    are tried so several participants can share one host. An optional
    second socket joins a multicast group for discovery; failures to set
    that up are logged and unicast continues alone.
    """

    def __init__(self, domain_id: int = 0, *, port: int | None = None,
                 bind_host: str = "0.0.0.0",
                 multicast_group: str | None = None,
                 multicast_port: int | None = None):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.setblocking(False)
        preferred = port if port is not None else default_port(domain_id)
        bound = None
        for candidate in range(preferred, preferred + PORT_RETRIES + 1):
            try:
                self._sock.bind((bind_host, candidate))
                bound = candidate
                break
            except OSError:
                continue
        if bound is None:
            self._sock.close()
            raise TransportError(
                f"no free port in [{preferred}, {preferred + PORT_RETRIES}]")
        self.port = bound
        self.local_address = (bind_host, bound)
        self._mcast_sock: socket.socket | None = None
        self.multicast_address: tuple[str, int] | None = None
        if multicast_group is not None:
            self._join_multicast(multicast_group,
                                 multicast_port if multicast_port is not None else preferred)
        self._closed = False

    def _join_multicast(self, group: str, port: int) -> None:
        try:
            sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            if hasattr(socket, "SO_REUSEPORT"):
                sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEPORT, 1)
            sock.setblocking(False)
            sock.bind(("", port))
            member = struct.pack("4s4s", socket.inet_aton(group),
                                 socket.inet_aton("0.0.0.0"))
            sock.setsockopt(socket.IPPROTO_IP, socket.IP_ADD_MEMBERSHIP, member)
            self._sock.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_TTL, 1)
            self._sock.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_LOOP, 1)
            self._mcast_sock = sock
            self.multicast_address = (group, port)
        except OSError as exc:
            log.warning("multicast %s:%d unavailable (%s); using unicast only",
                        group, port, exc)

    def send(self, data: bytes, dest: tuple[str, int]) -> None:
        try:
            self._sock.sendto(data, dest)
        except OSError as exc:
            log.warning("send to %s failed: %s", dest, exc)

    def drain(self) -> list[tuple[bytes, tuple[str, int]]]:
        out: list[tuple[bytes, tuple[str, int]]] = []
        for sock in filter(None, (self._sock, self._mcast_sock)):
            while True:
                try:
                    data, src = sock.recvfrom(65535)
                except BlockingIOError:
                    break
                except OSError:
                    break
                out.append((data, src))
        return out

    def wait(self, timeout: float) -> bool:
        socks = [s for s in (self._sock, self._mcast_sock) if s is not None]
        if self._closed or not socks:
            return False
        try:
            readable, _, _ = select.select(socks, [], [], timeout)
        except OSError:
            return False
        return bool(readable)

    def close(self) -> None:
        self._closed = True
        self._sock.close()
        if self._mcast_sock is not None:
            self._mcast_sock.close()


@dataclass(frozen=True)
class LossyConfig:
    drop_probability: float = 0.0
    duplicate_probability: float = 0.0
    max_reorder_depth: int = 0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ValueError("drop_probability outside [0, 1]")
        if not 0.0 <= self.duplicate_probability <= 1.0:
            raise ValueError("duplicate_probability outside [0, 1]")
        if self.max_reorder_depth < 0:
            raise ValueError("max_reorder_depth must be >= 0")


class InProcNetwork:
    """Hub connecting in-process transports, with seeded fault injection.

    Faults draw from one ``random.Random(seed)`` in a fixed order per
    send (drop, then duplicate, then a reorder offset per delivered
    copy), which is what makes replays bit-identical.
    """

    def __init__(self, config: LossyConfig | None = None):
        self.config = config or LossyConfig()
        self._rng = random.Random(self.config.seed)
        self._endpoints: dict[str, "InProcTransport"] = {}

    def attach(self, name: str) -> "InProcTransport":
        if name in self._endpoints:
            raise ValueError(f"address {name!r} already attached")
        transport = InProcTransport(self, name)
        self._endpoints[name] = transport
        return transport

    def detach(self, name: str) -> None:
        self._endpoints.pop(name, None)

    def addresses(self) -> list[str]:
        return sorted(self._endpoints)

    def route(self, data: bytes, source: str, dest: str) -> None:
        cfg = self.config
        if cfg.drop_probability and self._rng.random() < cfg.drop_probability:
            return
        copies = 1
        if cfg.duplicate_probability and self._rng.random() < cfg.duplicate_probability:
            copies = 2
        target = self._endpoints.get(dest)
        for _ in range(copies):
            offset = 0
            if cfg.max_reorder_depth:
                offset = self._rng.randint(0, cfg.max_reorder_depth)
            if target is not None:
                target._deliver(data, source, offset)


class InProcTransport:
    def __init__(self, network: InProcNetwork, name: str):
        self.network = network
        self.local_address = name
        self._queue: list[tuple[bytes, str]] = []

    def _deliver(self, data: bytes, source: str, reorder_offset: int) -> None:
        # The new datagram may overtake up to `offset` queued ones.
        index = max(0, len(self._queue) - reorder_offset)
        self._queue.insert(index, (data, source))

    def send(self, data: bytes, dest: str) -> None:
        self.network.route(data, self.local_address, dest)

    def drain(self) -> list[tuple[bytes, str]]:
        out, self._queue = self._queue, []
        return out

    def wait(self, timeout: float) -> bool:
        return bool(self._queue)

    def close(self) -> None:
        self.network.detach(self.local_address)
