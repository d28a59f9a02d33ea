"""The writing endpoint: typed writes into a history cache plus delivery."""

from __future__ import annotations

from typing import Mapping, Optional, Union

from minidds import idl, qos
from minidds.dcps.errors import SampleTooLargeError
from minidds.dcps.guid import Guid
from minidds.dcps.history import ResourceLimitsError, WriterHistory, WriterSample
from minidds.dcps.matching import EndpointDescriptor, MatchRecord
from minidds.dcps.timing import DeadlineTracker
from minidds.rtps import wire
from minidds.rtps.reliability import Directed, WriterSession

# Largest payload that still fits one datagram beside the fixed framing.
MAX_PAYLOAD = wire.MAX_DATAGRAM - wire.HEADER_LEN - wire.SUBMSG_HEADER_LEN - 36


class DataWriter:
    def __init__(self, participant, topic, profile: qos.QosProfile,
                 descriptor: EndpointDescriptor):
        self.participant = participant
        self.topic = topic
        self.qos = profile
        self.guid = descriptor.guid
        self.descriptor = descriptor
        self.type = topic.type

        self._reliable = (profile.value(qos.QosPolicyId.RELIABILITY).kind
                          == qos.ReliabilityKind.RELIABLE)
        transient = (profile.value(qos.QosPolicyId.DURABILITY).kind
                     == qos.DurabilityKind.TRANSIENT_LOCAL)
        history_qos = profile.value(qos.QosPolicyId.HISTORY)
        self._keep_all = history_qos.kind == qos.HistoryKind.KEEP_ALL
        self._lifespan_ns = profile.value(qos.QosPolicyId.LIFESPAN).duration_ns
        self.history = WriterHistory(history_qos,
                                     profile.value(qos.QosPolicyId.RESOURCE_LIMITS))
        self.session = WriterSession(
            self.history, writer_entity_id=self.guid.entity_id,
            transient_local=transient,
            heartbeat_period_ns=participant.heartbeat_period_ns,
            response_delay_ns=participant.response_delay_ns)
        self._deadlines = DeadlineTracker(
            profile.value(qos.QosPolicyId.DEADLINE).period_ns)
        self._match_records: dict[Guid, MatchRecord] = {}
        self.samples_written = 0
        self.closed = False

    # -- matching (driven by the participant) -------------------------

    def _add_match(self, record: MatchRecord, now_ns: int) -> list[Directed]:
        remote = record.remote
        if remote.guid in self._match_records:
            self._match_records[remote.guid] = record
            return []
        self._match_records[remote.guid] = record
        reliable = remote.rxo.reliability == qos.ReliabilityKind.RELIABLE
        wants_history = remote.rxo.durability == qos.DurabilityKind.TRANSIENT_LOCAL
        return self.session.add_reader(remote.guid, reliable=reliable,
                                       wants_history=wants_history, now_ns=now_ns)

    def _remove_match(self, guid: Guid) -> None:
        if self._match_records.pop(guid, None) is not None:
            self.session.remove_reader(guid)

    def matches(self) -> list[MatchRecord]:
        return list(self._match_records.values())

    def matched_readers(self) -> list[Guid]:
        return list(self._match_records)

    # -- write path ---------------------------------------------------

    def write(self, sample: Union[idl.Sample, Mapping],
              source_timestamp_ns: Optional[int] = None) -> int:
        """Serialize, cache, and hand the sample to delivery.

        Returns the sequence number. Raises ``TypeMismatchError`` for a
        sample of the wrong shape, ``SampleTooLargeError`` past the
        datagram limit, and ``ResourceLimitsError`` when a full keep-all
        history does not drain within max_blocking_time.
        """
        if self.closed:
            raise RuntimeError("writer is closed")
        if isinstance(sample, idl.Sample):
            if sample.type_name != self.type.name:
                raise idl.TypeMismatchError(
                    f"sample is {sample.type_name!r}, topic carries {self.type.name!r}")
        else:
            sample = idl.make_sample(self.type, sample)
        payload = idl.serialize(self.type, sample)
        if len(payload) > MAX_PAYLOAD:
            raise SampleTooLargeError(
                f"{len(payload)} byte payload exceeds the {MAX_PAYLOAD} byte limit")
        handle = idl.key_hash(self.type, sample)
        clock = self.participant.clock
        block_deadline = None
        spins = 0
        while True:
            with self.participant._lock:
                if self.history.has_room(handle):
                    now_wall = clock.wall_ns()
                    source_ts = (source_timestamp_ns
                                 if source_timestamp_ns is not None else now_wall)
                    expiry = qos.INFINITE_NS
                    if self._lifespan_ns != qos.INFINITE_NS:
                        expiry = source_ts + self._lifespan_ns
                    sequence = self.session.last_sequence + 1
                    record = WriterSample(sequence, handle, payload, source_ts, expiry)
                    evicted = self.history.insert(record)
                    directed = self.session.on_write(record)
                    directed.extend(self.session.note_evicted(evicted))
                    self._deadlines.record(handle, clock.monotonic_ns())
                    self.samples_written += 1
                    self.participant._route(self, directed)
                    return sequence
            # Full keep-all cache: wait for acks to drain it, without
            # holding the participant lock (the dispatch context needs it).
            if not (self._reliable and self._keep_all):
                raise ResourceLimitsError("writer history full")
            now = clock.monotonic_ns()
            if block_deadline is None:
                block_deadline = now + self.participant.max_blocking_time_ns
            elif now >= block_deadline:
                raise ResourceLimitsError(
                    "write blocked on a full keep-all history past max_blocking_time")
            progressed = self.participant._pump_for_blocking()
            spins += 1
            if (not progressed and clock.monotonic_ns() == now) or spins > 100_000:
                raise ResourceLimitsError(
                    "write blocked on a full keep-all history with no drain in sight")

    # -- timers (driven by the participant) ---------------------------

    def _step(self, now_ns: int) -> list[Directed]:
        return self.session.step(now_ns)

    def _expire(self, now_wall_ns: int) -> list[Directed]:
        expired = self.history.expire(now_wall_ns)
        return self.session.note_evicted(expired) if expired else []

    def _on_acknack(self, reader_guid: Guid, sub: wire.AckNack,
                    now_ns: int) -> list[Directed]:
        return self.session.on_acknack(reader_guid, sub, now_ns)

    # -- introspection ------------------------------------------------

    def check_deadlines(self, now_ns: Optional[int] = None) -> list[tuple[int, int]]:
        if now_ns is None:
            now_ns = self.participant.clock.monotonic_ns()
        return self._deadlines.missed(now_ns)

    def unacknowledged(self) -> bool:
        return not self.session.all_acked()

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            self.participant._drop_endpoint(self)
