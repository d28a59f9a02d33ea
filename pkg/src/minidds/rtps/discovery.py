"""Announce-flood discovery: peer tracking, absence counting, timeouts.

Every participant broadcasts its full endpoint set each period. This
module keeps the receive-side book: which peers exist, what they last
advertised, and when an endpoint or a whole peer should be considered
gone. Matching itself stays with the caller; ``process_announce``
reports only what appeared, changed, or vanished.

Rules:
- announces from another domain, or echoes of our own, are ignored;
- an endpoint absent from 3 consecutive announces of its peer is removed;
- a peer silent for 3 announce periods is dropped with all endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Optional

from minidds.dcps.guid import Guid
from minidds.dcps.matching import EndpointDescriptor
from minidds.rtps import wire

ANNOUNCE_PERIOD_NS = 1_000_000_000
ABSENCE_LIMIT = 3
SILENCE_PERIODS = 3

Address = Hashable


@dataclass
class _Peer:
    address: Address
    last_seen_ns: int
    endpoints: dict[Guid, EndpointDescriptor] = field(default_factory=dict)
    missed: dict[Guid, int] = field(default_factory=dict)


@dataclass(frozen=True)
class PeerEvent:
    added: tuple[EndpointDescriptor, ...]
    changed: tuple[EndpointDescriptor, ...]
    removed: tuple[Guid, ...]
    new_peer: bool


class Discovery:
    def __init__(self, local_prefix: bytes, domain_id: int, *,
                 announce_period_ns: int = ANNOUNCE_PERIOD_NS,
                 static_peers: tuple[Address, ...] = ()):
        self.local_prefix = local_prefix
        self.domain_id = domain_id
        self.announce_period_ns = announce_period_ns
        self.static_peers = tuple(static_peers)
        self._peers: dict[bytes, _Peer] = {}
        self._last_announce_ns: Optional[int] = None

    # -- transmit side ------------------------------------------------

    def announce_due(self, now_ns: int) -> bool:
        return (self._last_announce_ns is None
                or now_ns - self._last_announce_ns >= self.announce_period_ns)

    def mark_announced(self, now_ns: int) -> None:
        self._last_announce_ns = now_ns

    def reset_announce_timer(self) -> None:
        """Make the next announce due immediately (endpoint set changed)."""
        self._last_announce_ns = None

    def destinations(self) -> list[Address]:
        """Static peers plus everyone we have heard from."""
        out: list[Address] = list(self.static_peers)
        for peer in self._peers.values():
            if peer.address not in out:
                out.append(peer.address)
        return out

    # -- receive side -------------------------------------------------

    def process_announce(self, announce: wire.Announce, sender_prefix: bytes,
                         source: Address, now_ns: int) -> Optional[PeerEvent]:
        if announce.domain_id != self.domain_id:
            return None
        if sender_prefix == self.local_prefix:
            return None
        peer = self._peers.get(sender_prefix)
        new_peer = peer is None
        if peer is None:
            peer = _Peer(address=source, last_seen_ns=now_ns)
            self._peers[sender_prefix] = peer
        peer.address = source
        peer.last_seen_ns = now_ns

        present = {ep.guid: ep for ep in announce.endpoints}
        added = []
        changed = []
        for guid, descriptor in present.items():
            known = peer.endpoints.get(guid)
            if known is None:
                added.append(descriptor)
            elif known != descriptor:
                changed.append(descriptor)
            peer.endpoints[guid] = descriptor
            peer.missed[guid] = 0

        removed = []
        for guid in [g for g in peer.endpoints if g not in present]:
            peer.missed[guid] = peer.missed.get(guid, 0) + 1
            if peer.missed[guid] >= ABSENCE_LIMIT:
                removed.append(guid)
                del peer.endpoints[guid]
                del peer.missed[guid]
        return PeerEvent(tuple(added), tuple(changed), tuple(removed), new_peer)

    def check_timeouts(self, now_ns: int) -> list[Guid]:
        """Drop peers silent for 3 periods; returns their endpoint guids."""
        removed: list[Guid] = []
        cutoff = SILENCE_PERIODS * self.announce_period_ns
        for prefix in [p for p, peer in self._peers.items()
                       if now_ns - peer.last_seen_ns >= cutoff]:
            removed.extend(self._peers[prefix].endpoints)
            del self._peers[prefix]
        return removed

    # -- lookups ------------------------------------------------------

    def address_of(self, prefix: bytes) -> Optional[Address]:
        peer = self._peers.get(prefix)
        return peer.address if peer is not None else None

    def endpoint(self, guid: Guid) -> Optional[EndpointDescriptor]:
        peer = self._peers.get(guid.prefix)
        return peer.endpoints.get(guid) if peer is not None else None

    def remote_endpoints(self) -> list[EndpointDescriptor]:
        return [ep for peer in self._peers.values()
                for ep in peer.endpoints.values()]

    def peer_count(self) -> int:
        return len(self._peers)
