"""Per-instance sample caches for writers and readers.

Both sides key their cache by instance handle and bound it with the history
policy (keep-last depth or keep-all) and resource limits. The writer cache
additionally serves retransmission lookups by sequence number and tracks
expiry; the reader cache backs read/take ordering.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Optional

from minidds import qos
from minidds.idl import Sample
from minidds.dcps.guid import Guid


class ResourceLimitsError(Exception):
    pass


@dataclass(frozen=True)
class SampleInfo:
    writer_guid: Guid
    sequence: int
    source_timestamp_ns: int
    arrival_timestamp_ns: int
    instance_handle: int


def _per_instance_cap(history: qos.History, limits: qos.ResourceLimits) -> Optional[int]:
    if history.kind == qos.HistoryKind.KEEP_LAST:
        cap = history.depth
        if limits.max_samples_per_instance is not None:
            cap = min(cap, limits.max_samples_per_instance)
        return cap
    return limits.max_samples_per_instance


# ---------------------------------------------------------------------------
# Writer side

@dataclass
class WriterSample:
    sequence: int
    instance_handle: int
    payload: bytes
    source_timestamp_ns: int
    expiry_wall_ns: int = qos.INFINITE_NS


class WriterHistory:
    """Outgoing sample store; samples leave on ack release, keep-last
    eviction, expiry, or (keep-all) not at all until limits push back."""

    def __init__(self, history: qos.History, limits: qos.ResourceLimits):
        self.history = history
        self.limits = limits
        self.by_seq: dict[int, WriterSample] = {}
        self.per_instance: dict[int, list[int]] = {}

    def __len__(self) -> int:
        return len(self.by_seq)

    def get(self, sequence: int) -> Optional[WriterSample]:
        return self.by_seq.get(sequence)

    def oldest_sequence(self) -> Optional[int]:
        return min(self.by_seq) if self.by_seq else None

    def has_room(self, handle: int) -> bool:
        """Whether an insert for this instance would be accepted without
        keep-all rejection (keep-last always makes room by evicting)."""
        if handle not in self.per_instance:
            if (self.limits.max_instances is not None
                    and len(self.per_instance) >= self.limits.max_instances):
                return False
        if self.history.kind == qos.HistoryKind.KEEP_LAST:
            return True
        cap = _per_instance_cap(self.history, self.limits)
        if cap is not None and len(self.per_instance.get(handle, ())) >= cap:
            return False
        if self.limits.max_samples is not None and len(self.by_seq) >= self.limits.max_samples:
            return False
        return True

    def insert(self, sample: WriterSample) -> list[WriterSample]:
        """Store a sample, returning any keep-last evictions. Raises
        ``ResourceLimitsError`` when there is no room (callers decide whether
        that blocks or errors)."""
        handle = sample.instance_handle
        if not self.has_room(handle):
            raise ResourceLimitsError("writer history full")
        evicted: list[WriterSample] = []
        if self.history.kind == qos.HistoryKind.KEEP_LAST:
            # Re-fetch the bucket after every removal: _remove deletes it
            # from the index when it empties, so a held reference would
            # strand the inserted sequence outside the index.
            cap = _per_instance_cap(self.history, self.limits)
            while (cap is not None
                   and len(self.per_instance.get(handle, ())) >= cap):
                evicted.append(self._remove(self.per_instance[handle][0]))
            if (self.limits.max_samples is not None
                    and len(self.by_seq) >= self.limits.max_samples):
                seqs = self.per_instance.get(handle)
                if seqs:
                    evicted.append(self._remove(seqs[0]))
                else:
                    raise ResourceLimitsError("writer history full (max_samples)")
        self.by_seq[sample.sequence] = sample
        self.per_instance.setdefault(handle, []).append(sample.sequence)
        return evicted

    def _remove(self, sequence: int) -> WriterSample:
        sample = self.by_seq.pop(sequence)
        seqs = self.per_instance[sample.instance_handle]
        seqs.remove(sequence)
        if not seqs:
            del self.per_instance[sample.instance_handle]
        return sample

    def release(self, up_to_sequence: int) -> list[int]:
        """Drop fully acknowledged samples (volatile writers only)."""
        released = [s for s in self.by_seq if s <= up_to_sequence]
        for seq in released:
            self._remove(seq)
        return released

    def expire(self, now_wall_ns: int) -> list[WriterSample]:
        expired = [s for s in self.by_seq.values() if s.expiry_wall_ns < now_wall_ns]
        for sample in expired:
            self._remove(sample.sequence)
        return expired


# ---------------------------------------------------------------------------
# Reader side

@dataclass
class CachedSample:
    info: SampleInfo
    sample: Sample
    arrival_index: int

    def order_key(self):
        return (self.info.sequence, self.info.writer_guid, self.arrival_index)


@dataclass
class InsertOutcome:
    accepted: bool
    reason: Optional[str] = None  # set when rejected
    evicted_arriving: bool = False
    evicted_count: int = 0


class ReaderHistory:
    """Received sample store backing read/take.

    Keep-last eviction removes the lowest (sequence, writer guid) entry per
    instance, so a late retransmission older than the cached depth falls out
    again immediately and the cache converges to the newest samples.
    """

    def __init__(self, history: qos.History, limits: qos.ResourceLimits):
        self.history = history
        self.limits = limits
        self.instances: dict[int, list[CachedSample]] = {}
        self._arrival_counter = 0
        self.total = 0

    def insert(self, info: SampleInfo, sample: Sample) -> InsertOutcome:
        handle = info.instance_handle
        samples = self.instances.get(handle)
        if samples is None:
            if (self.limits.max_instances is not None
                    and len(self.instances) >= self.limits.max_instances):
                return InsertOutcome(False, "max_instances")
            samples = self.instances[handle] = []
        cap = _per_instance_cap(self.history, self.limits)
        if self.history.kind == qos.HistoryKind.KEEP_ALL:
            if cap is not None and len(samples) >= cap:
                return InsertOutcome(False, "max_samples_per_instance")
            if self.limits.max_samples is not None and self.total >= self.limits.max_samples:
                return InsertOutcome(False, "max_samples")
        entry = CachedSample(info, sample, self._arrival_counter)
        self._arrival_counter += 1
        samples.append(entry)
        self.total += 1
        evicted_arriving = False
        evicted_count = 0
        if self.history.kind == qos.HistoryKind.KEEP_LAST:
            while cap is not None and len(samples) > cap:
                victim = min(samples, key=CachedSample.order_key)
                samples.remove(victim)
                self.total -= 1
                evicted_count += 1
                if victim is entry:
                    evicted_arriving = True
            while (self.limits.max_samples is not None
                   and self.total > self.limits.max_samples):
                victim = min(samples, key=CachedSample.order_key)
                samples.remove(victim)
                self.total -= 1
                evicted_count += 1
                if victim is entry:
                    evicted_arriving = True
        if not self.instances[handle]:
            del self.instances[handle]
        return InsertOutcome(True, evicted_arriving=evicted_arriving,
                             evicted_count=evicted_count)

    def _ordered(self) -> list[CachedSample]:
        entries = []
        for handle in sorted(self.instances):
            entries.extend(sorted(self.instances[handle], key=CachedSample.order_key))
        return entries

    def read(self, max_samples: int) -> list[tuple[Sample, SampleInfo]]:
        if max_samples < 1:
            raise ValueError("max_samples must be >= 1")
        return [(e.sample, e.info) for e in self._ordered()[:max_samples]]

    def take(self, max_samples: int) -> list[tuple[Sample, SampleInfo]]:
        if max_samples < 1:
            raise ValueError("max_samples must be >= 1")
        taken = self._ordered()[:max_samples]
        for entry in taken:
            samples = self.instances[entry.info.instance_handle]
            samples.remove(entry)
            if not samples:
                del self.instances[entry.info.instance_handle]
            self.total -= 1
        return [(e.sample, e.info) for e in taken]
