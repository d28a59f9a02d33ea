"""Reliable and best-effort delivery sessions.

Sessions are transport-free state machines: every input carries ``now``
(nanoseconds) and outputs are ``Directed`` submessages for the caller to
route. A ``dest`` of None means "every matched peer of this writer";
otherwise the datagram goes only to that reader's participant.

Writer side, per matched reader: acknowledged floor, heartbeat timer,
and per-sequence retransmit stamps. Heartbeats flow every
``heartbeat_period`` (50 ms) while that reader has unacked samples and
stop once it is caught up. A requested sequence still in the cache is
retransmitted at most once per ``response_delay`` (5 ms); a requested
sequence no longer in the cache is answered with a GAP.

Reader side: a settled floor plus a sparse set of received sequences
above it. GAPs and a heartbeat ``first_seq`` above the floor both mark
the skipped range as unrecoverable, counted in ``samples_lost``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from minidds.dcps.guid import Guid
from minidds.dcps.history import WriterHistory, WriterSample
from minidds.rtps import wire

HEARTBEAT_PERIOD_NS = 50_000_000
RESPONSE_DELAY_NS = 5_000_000

# A give-up span larger than this collapses the whole range below it
# instead of materializing per-sequence entries (defends against bogus
# GAP/HEARTBEAT input).
_MAX_GIVEUP_SPAN = 65536


@dataclass(frozen=True)
class Directed:
    dest: Optional[Guid]
    submessage: wire.Submessage


@dataclass
class _ReaderProxy:
    guid: Guid
    reliable: bool
    acked_below: int  # every sequence < this is settled for the reader
    last_heartbeat_ns: int
    last_resend_ns: dict[int, int] = field(default_factory=dict)


def _merge_ranges(seqs: list[int]) -> list[tuple[int, int]]:
    ranges: list[tuple[int, int]] = []
    for seq in sorted(seqs):
        if ranges and seq == ranges[-1][1] + 1:
            ranges[-1] = (ranges[-1][0], seq)
        else:
            ranges.append((seq, seq))
    return ranges


class WriterSession:
    """Delivery bookkeeping for one writer over its matched readers."""

    def __init__(self, history: WriterHistory, *, writer_entity_id: int,
                 transient_local: bool,
                 heartbeat_period_ns: int = HEARTBEAT_PERIOD_NS,
                 response_delay_ns: int = RESPONSE_DELAY_NS):
        self.history = history
        self.writer_entity_id = writer_entity_id
        self.transient_local = transient_local
        self.heartbeat_period_ns = heartbeat_period_ns
        self.response_delay_ns = response_delay_ns
        self.last_sequence = 0
        self._heartbeat_count = 0
        self._proxies: dict[Guid, _ReaderProxy] = {}

    # -- membership ---------------------------------------------------

    def add_reader(self, guid: Guid, *, reliable: bool, wants_history: bool,
                   now_ns: int) -> list[Directed]:
        """Register a matched reader; returns any late-joiner replay."""
        cached = sorted(self.history.by_seq)
        if reliable and wants_history and cached:
            floor = cached[0]
        else:
            floor = self.last_sequence + 1
        proxy = _ReaderProxy(guid, reliable, acked_below=floor,
                             last_heartbeat_ns=now_ns - self.heartbeat_period_ns)
        self._proxies[guid] = proxy
        out: list[Directed] = []
        if reliable and wants_history:
            for seq in cached:
                if seq < floor:
                    continue
                sample = self.history.by_seq[seq]
                out.append(Directed(guid, self._data_for(sample, guid.entity_id)))
        return out

    def remove_reader(self, guid: Guid) -> None:
        self._proxies.pop(guid, None)
        self._maybe_release()

    def matched_readers(self) -> list[Guid]:
        return list(self._proxies)

    # -- write path ---------------------------------------------------

    def _data_for(self, sample: WriterSample, reader_entity_id: int) -> wire.Data:
        return wire.Data(self.writer_entity_id, reader_entity_id, sample.sequence,
                         sample.source_timestamp_ns, sample.instance_handle,
                         sample.payload)

    def on_write(self, sample: WriterSample) -> list[Directed]:
        self.last_sequence = max(self.last_sequence, sample.sequence)
        out = [Directed(None, self._data_for(sample, 0))]
        self._maybe_release()
        return out

    def note_evicted(self, evicted: list[WriterSample]) -> list[Directed]:
        """Advertise history-evicted sequences so readers stop asking."""
        unsettled = [s.sequence for s in evicted if any(
            p.reliable and s.sequence >= p.acked_below for p in self._proxies.values())]
        return [Directed(None, wire.Gap(self.writer_entity_id, lo, hi))
                for lo, hi in _merge_ranges(unsettled)]

    # -- acknowledgements ---------------------------------------------

    def on_acknack(self, reader_guid: Guid, ack: wire.AckNack,
                   now_ns: int) -> list[Directed]:
        proxy = self._proxies.get(reader_guid)
        if proxy is None or not proxy.reliable:
            return []
        if ack.base_seq > proxy.acked_below:
            proxy.acked_below = ack.base_seq
            for seq in [s for s in proxy.last_resend_ns if s < ack.base_seq]:
                del proxy.last_resend_ns[seq]
            self._maybe_release()
        out: list[Directed] = []
        gone: list[int] = []
        for seq in ack.missing:
            sample = self.history.by_seq.get(seq)
            if sample is not None:
                last = proxy.last_resend_ns.get(seq)
                if last is None or now_ns - last >= self.response_delay_ns:
                    proxy.last_resend_ns[seq] = now_ns
                    out.append(Directed(reader_guid,
                                        self._data_for(sample, reader_guid.entity_id)))
            elif seq <= self.last_sequence:
                gone.append(seq)
        for lo, hi in _merge_ranges(gone):
            out.append(Directed(reader_guid, wire.Gap(self.writer_entity_id, lo, hi)))
        return out

    def _maybe_release(self) -> None:
        if self.transient_local:
            return  # the cache outlives acks for late joiners
        floors = [p.acked_below for p in self._proxies.values() if p.reliable]
        settled_below = min(floors) if floors else self.last_sequence + 1
        self.history.release(settled_below - 1)

    # -- timers -------------------------------------------------------

    def _unacked(self, proxy: _ReaderProxy) -> bool:
        return proxy.reliable and proxy.acked_below <= self.last_sequence

    def all_acked(self) -> bool:
        return not any(self._unacked(p) for p in self._proxies.values())

    def step(self, now_ns: int) -> list[Directed]:
        out: list[Directed] = []
        for proxy in self._proxies.values():
            if not self._unacked(proxy):
                continue
            if now_ns - proxy.last_heartbeat_ns < self.heartbeat_period_ns:
                continue
            proxy.last_heartbeat_ns = now_ns
            pending = [s for s in self.history.by_seq if s >= proxy.acked_below]
            first = min(pending) if pending else self.last_sequence + 1
            self._heartbeat_count += 1
            out.append(Directed(proxy.guid, wire.Heartbeat(
                self.writer_entity_id, first, self.last_sequence,
                self._heartbeat_count)))
        return out


class ReliableReaderSession:
    """Reader-side tracking for one matched reliable writer."""

    def __init__(self, writer_guid: Guid, reader_entity_id: int):
        self.writer_guid = writer_guid
        self.reader_entity_id = reader_entity_id
        self.floor = 0  # every sequence <= floor is settled
        self.received: set[int] = set()
        self.samples_lost = 0
        self.unique_received = 0
        self._last_heartbeat_count = 0

    def _compact(self) -> None:
        while self.floor + 1 in self.received:
            self.floor += 1
            self.received.remove(self.floor)

    def _give_up(self, start: int, end: int) -> None:
        start = max(start, self.floor + 1)
        if start > end:
            return
        if start == self.floor + 1 or end - start + 1 > _MAX_GIVEUP_SPAN:
            got = sum(1 for s in self.received if s <= end)
            self.samples_lost += (end - self.floor) - got
            self.received = {s for s in self.received if s > end}
            self.floor = end
        else:
            for seq in range(start, end + 1):
                if seq not in self.received:
                    self.samples_lost += 1
                    self.received.add(seq)
            self._compact()

    def on_data(self, sequence: int) -> bool:
        """True when this sequence is new (deliver it); False = duplicate."""
        if sequence <= self.floor or sequence in self.received:
            return False
        self.unique_received += 1
        self.received.add(sequence)
        self._compact()
        return True

    def on_gap(self, gap: wire.Gap) -> None:
        self._give_up(gap.gap_start, gap.gap_end)

    def on_heartbeat(self, hb: wire.Heartbeat) -> Optional[wire.AckNack]:
        if hb.count <= self._last_heartbeat_count:
            return None  # stale or duplicated heartbeat
        self._last_heartbeat_count = hb.count
        if hb.first_seq > self.floor + 1:
            # The writer no longer offers anything below first_seq.
            self._give_up(self.floor + 1, hb.first_seq - 1)
        base = self.floor + 1
        window_end = min(hb.last_seq, base + wire.ACKNACK_MAX_BITS - 1)
        missing = tuple(s for s in range(base, window_end + 1)
                        if s not in self.received)
        return wire.AckNack(self.reader_entity_id, self.writer_guid, base, missing)


class BestEffortReaderSession:
    """Stale-drop and loss counting for one best-effort writer.

    Samples older than the newest delivered one are never delivered, but
    a bounded window remembers recent sequences so an out-of-order
    straggler still counts as received (not lost) exactly once.
    """

    WINDOW = 1024

    def __init__(self, writer_guid: Guid):
        self.writer_guid = writer_guid
        self.last_sequence = 0
        self.samples_lost = 0
        self.unique_received = 0
        self._recent: set[int] = set()

    def on_data(self, sequence: int) -> bool:
        if sequence > self.last_sequence:
            self.samples_lost += sequence - self.last_sequence - 1
            self.unique_received += 1
            self.last_sequence = sequence
            self._recent.add(sequence)
            floor = sequence - self.WINDOW
            if len(self._recent) > self.WINDOW:
                self._recent = {s for s in self._recent if s > floor}
            return True
        if sequence in self._recent or sequence <= self.last_sequence - self.WINDOW:
            return False  # duplicate (or too old to tell)
        # A straggler that lost a race with newer samples: arrived, but
        # stays undelivered to preserve ordering.
        self.unique_received += 1
        self.samples_lost -= 1
        self._recent.add(sequence)
        return False
