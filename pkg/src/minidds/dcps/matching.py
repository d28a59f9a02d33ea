"""Discovery-visible endpoint descriptors and the matching rule.

A writer/reader pair matches when domain, topic name and type name agree,
partition name lists intersect, and the reader's requested QoS is satisfiable
by the writer's offer. Incompatibility is reported as data, not an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

from minidds import qos
from minidds.dcps.guid import Guid


class EndpointType(IntEnum):
    WRITER = 0
    READER = 1


@dataclass(frozen=True)
class RxoQos:
    """The negotiated policy values an endpoint advertises, plus partition
    names and ownership strength (match-affecting but not negotiated)."""

    reliability: qos.ReliabilityKind = qos.ReliabilityKind.BEST_EFFORT
    durability: qos.DurabilityKind = qos.DurabilityKind.VOLATILE
    destination_order: qos.DestinationOrderKind = qos.DestinationOrderKind.BY_RECEPTION_TIMESTAMP
    ownership: qos.OwnershipKind = qos.OwnershipKind.SHARED
    ownership_strength: int = 0
    presentation_scope: qos.AccessScope = qos.AccessScope.INSTANCE
    presentation_coherent: bool = False
    presentation_ordered: bool = False
    deadline_period_ns: int = qos.INFINITE_NS
    latency_budget_ns: int = 0
    partitions: tuple[str, ...] = ("",)

    @classmethod
    def from_profile(cls, profile: qos.QosProfile) -> "RxoQos":
        pres = profile.value(qos.QosPolicyId.PRESENTATION)
        return cls(
            reliability=profile.value(qos.QosPolicyId.RELIABILITY).kind,
            durability=profile.value(qos.QosPolicyId.DURABILITY).kind,
            destination_order=profile.value(qos.QosPolicyId.DESTINATION_ORDER).kind,
            ownership=profile.value(qos.QosPolicyId.OWNERSHIP).kind,
            ownership_strength=profile.value(qos.QosPolicyId.OWNERSHIP_STRENGTH).value,
            presentation_scope=pres.access_scope,
            presentation_coherent=pres.coherent_access,
            presentation_ordered=pres.ordered_access,
            deadline_period_ns=profile.value(qos.QosPolicyId.DEADLINE).period_ns,
            latency_budget_ns=profile.value(qos.QosPolicyId.LATENCY_BUDGET).duration_ns,
            partitions=profile.value(qos.QosPolicyId.PARTITION).names,
        )

    def to_profile(self, entity_kind: qos.EntityKind) -> qos.QosProfile:
        return qos.profile(entity_kind, [
            qos.Reliability(self.reliability),
            qos.Durability(self.durability),
            qos.DestinationOrder(self.destination_order),
            qos.Ownership(self.ownership),
            qos.OwnershipStrength(self.ownership_strength),
            qos.Presentation(self.presentation_scope, self.presentation_coherent,
                             self.presentation_ordered),
            qos.Deadline(self.deadline_period_ns),
            qos.LatencyBudget(self.latency_budget_ns),
            qos.Partition(self.partitions),
        ])


@dataclass(frozen=True)
class EndpointDescriptor:
    guid: Guid
    domain_id: int
    topic_name: str
    type_name: str
    kind: EndpointType
    rxo: RxoQos = field(default_factory=RxoQos)


@dataclass(frozen=True)
class MatchRecord:
    local_guid: Guid
    remote: EndpointDescriptor
    report: qos.CompatibilityReport


@dataclass(frozen=True)
class NoMatch:
    reason: str
    report: Optional[qos.CompatibilityReport] = None


def match_endpoints(a: EndpointDescriptor, b: EndpointDescriptor) -> MatchRecord | NoMatch:
    """Match one writer-side and one reader-side descriptor.

    Symmetric in its arguments; the returned record is oriented from ``a``.
    """
    if a.kind == b.kind:
        raise ValueError("matching needs one writer and one reader")
    writer, reader = (a, b) if a.kind == EndpointType.WRITER else (b, a)
    if writer.domain_id != reader.domain_id:
        return NoMatch("different domains")
    if writer.topic_name != reader.topic_name:
        return NoMatch("different topics")
    if writer.type_name != reader.type_name:
        return NoMatch(f"topic {writer.topic_name!r} has conflicting types")
    if not qos.partitions_intersect(writer.rxo.partitions, reader.rxo.partitions):
        return NoMatch("partitions do not intersect")
    report = qos.check_compatibility(
        writer.rxo.to_profile(qos.EntityKind.DATA_WRITER),
        reader.rxo.to_profile(qos.EntityKind.DATA_READER),
    )
    if not report.compatible:
        return NoMatch(f"requested QoS exceeds offer: {report.describe()}", report)
    return MatchRecord(a.guid, b, report)
