"""QoS policies: metadata table, typed policy values, profiles, and the
request/offered compatibility engine.

Eighteen policies are modeled. Each carries static metadata (which entity
kinds it applies to, whether it takes part in request/offered negotiation,
whether it may change after enable, and its functional group). Profiles are
immutable snapshots; ``set_policy`` returns a new profile. Compatibility is
a pure function producing a report, never an exception.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import ClassVar, Iterable, Mapping, Optional, Union

# Duration sentinel: treated as "infinite", compares above any real duration
# and still fits a signed 64-bit wire field.
INFINITE_NS = 2**63 - 1


class EntityKind(Enum):
    TOPIC = "T"
    DATA_READER = "DR"
    DATA_WRITER = "DW"
    PARTICIPANT = "DP"
    PUBLISHER = "P"
    SUBSCRIBER = "S"


class QosPolicyId(Enum):
    """The 18 policies, in table row order."""

    DURABILITY = 1
    DURABILITY_SERVICE = 2
    LIFESPAN = 3
    HISTORY = 4
    PRESENTATION = 5
    RELIABILITY = 6
    PARTITION = 7
    DESTINATION_ORDER = 8
    OWNERSHIP = 9
    OWNERSHIP_STRENGTH = 10
    DEADLINE = 11
    LATENCY_BUDGET = 12
    TRANSPORT_PRIORITY = 13
    TIME_BASED_FILTER = 14
    RESOURCE_LIMITS = 15
    USER_DATA = 16
    TOPIC_DATA = 17
    GROUP_DATA = 18


class Rxo(Enum):
    YES = "Y"
    NO = "N"
    NOT_APPLICABLE = "-"


class PolicyGroup(Enum):
    DATA_AVAILABILITY = "Data Availability"
    DATA_DELIVERY = "Data Delivery"
    DATA_TIMELINESS = "Data Timeliness"
    RESOURCES = "Resources"
    CONFIGURATION = "Configuration"


@dataclass(frozen=True)
class PolicyMeta:
    id: QosPolicyId
    applicability: frozenset[EntityKind]
    rxo: Rxo
    modifiable: bool
    group: PolicyGroup


def _meta(pid, kinds, rxo, modifiable, group):
    return PolicyMeta(pid, frozenset(kinds), rxo, modifiable, group)


_K = EntityKind
_POLICY_TABLE: dict[QosPolicyId, PolicyMeta] = {
    m.id: m
    for m in (
        _meta(QosPolicyId.DURABILITY, {_K.TOPIC, _K.DATA_READER, _K.DATA_WRITER},
              Rxo.YES, False, PolicyGroup.DATA_AVAILABILITY),
        _meta(QosPolicyId.DURABILITY_SERVICE, {_K.TOPIC, _K.DATA_WRITER},
              Rxo.NO, False, PolicyGroup.DATA_AVAILABILITY),
        _meta(QosPolicyId.LIFESPAN, {_K.TOPIC, _K.DATA_WRITER},
              Rxo.NOT_APPLICABLE, True, PolicyGroup.DATA_AVAILABILITY),
        _meta(QosPolicyId.HISTORY, {_K.TOPIC, _K.DATA_READER, _K.DATA_WRITER},
              Rxo.NO, False, PolicyGroup.DATA_AVAILABILITY),
        _meta(QosPolicyId.PRESENTATION, {_K.PUBLISHER, _K.SUBSCRIBER},
              Rxo.YES, False, PolicyGroup.DATA_DELIVERY),
        _meta(QosPolicyId.RELIABILITY, {_K.TOPIC, _K.DATA_READER, _K.DATA_WRITER},
              Rxo.YES, False, PolicyGroup.DATA_DELIVERY),
        _meta(QosPolicyId.PARTITION, {_K.PUBLISHER, _K.SUBSCRIBER},
              Rxo.NO, True, PolicyGroup.DATA_DELIVERY),
        _meta(QosPolicyId.DESTINATION_ORDER, {_K.TOPIC, _K.DATA_READER, _K.DATA_WRITER},
              Rxo.YES, False, PolicyGroup.DATA_DELIVERY),
        _meta(QosPolicyId.OWNERSHIP, {_K.TOPIC, _K.DATA_READER, _K.DATA_WRITER},
              Rxo.YES, False, PolicyGroup.DATA_DELIVERY),
        _meta(QosPolicyId.OWNERSHIP_STRENGTH, {_K.DATA_WRITER},
              Rxo.NOT_APPLICABLE, True, PolicyGroup.DATA_TIMELINESS),
        _meta(QosPolicyId.DEADLINE, {_K.TOPIC, _K.DATA_READER, _K.DATA_WRITER},
              Rxo.YES, True, PolicyGroup.DATA_TIMELINESS),
        _meta(QosPolicyId.LATENCY_BUDGET, {_K.TOPIC, _K.DATA_READER, _K.DATA_WRITER},
              Rxo.YES, True, PolicyGroup.DATA_TIMELINESS),
        _meta(QosPolicyId.TRANSPORT_PRIORITY, {_K.TOPIC, _K.DATA_WRITER},
              Rxo.NOT_APPLICABLE, True, PolicyGroup.DATA_TIMELINESS),
        _meta(QosPolicyId.TIME_BASED_FILTER, {_K.DATA_READER},
              Rxo.NOT_APPLICABLE, True, PolicyGroup.RESOURCES),
        _meta(QosPolicyId.RESOURCE_LIMITS, {_K.TOPIC, _K.DATA_READER, _K.DATA_WRITER},
              Rxo.NO, False, PolicyGroup.RESOURCES),
        _meta(QosPolicyId.USER_DATA, {_K.PARTICIPANT, _K.DATA_READER, _K.DATA_WRITER},
              Rxo.NO, True, PolicyGroup.CONFIGURATION),
        _meta(QosPolicyId.TOPIC_DATA, {_K.TOPIC},
              Rxo.NO, True, PolicyGroup.CONFIGURATION),
        _meta(QosPolicyId.GROUP_DATA, {_K.PUBLISHER, _K.SUBSCRIBER},
              Rxo.NO, True, PolicyGroup.CONFIGURATION),
    )
}

assert len(_POLICY_TABLE) == 18


def policy_meta(policy_id: QosPolicyId) -> PolicyMeta:
    """Metadata row for a policy. Total over the enumeration."""
    return _POLICY_TABLE[policy_id]


# ---------------------------------------------------------------------------
# Policy value kinds. IntEnum so the offered >= requested orderings are just
# integer comparisons.

class ReliabilityKind(IntEnum):
    BEST_EFFORT = 0
    RELIABLE = 1


class DurabilityKind(IntEnum):
    VOLATILE = 0
    TRANSIENT_LOCAL = 1


class HistoryKind(IntEnum):
    KEEP_LAST = 0
    KEEP_ALL = 1


class DestinationOrderKind(IntEnum):
    BY_RECEPTION_TIMESTAMP = 0
    BY_SOURCE_TIMESTAMP = 1


class OwnershipKind(IntEnum):
    SHARED = 0
    EXCLUSIVE = 1


class AccessScope(IntEnum):
    INSTANCE = 0
    TOPIC = 1


@dataclass(frozen=True)
class Reliability:
    policy_id: ClassVar[QosPolicyId] = QosPolicyId.RELIABILITY
    kind: ReliabilityKind = ReliabilityKind.BEST_EFFORT


@dataclass(frozen=True)
class Durability:
    policy_id: ClassVar[QosPolicyId] = QosPolicyId.DURABILITY
    kind: DurabilityKind = DurabilityKind.VOLATILE


@dataclass(frozen=True)
class DurabilityService:
    policy_id: ClassVar[QosPolicyId] = QosPolicyId.DURABILITY_SERVICE
    cleanup_delay_ns: int = 0


@dataclass(frozen=True)
class Lifespan:
    policy_id: ClassVar[QosPolicyId] = QosPolicyId.LIFESPAN
    duration_ns: int = INFINITE_NS


@dataclass(frozen=True)
class History:
    policy_id: ClassVar[QosPolicyId] = QosPolicyId.HISTORY
    kind: HistoryKind = HistoryKind.KEEP_LAST
    depth: int = 1


@dataclass(frozen=True)
class Presentation:
    policy_id: ClassVar[QosPolicyId] = QosPolicyId.PRESENTATION
    access_scope: AccessScope = AccessScope.INSTANCE
    coherent_access: bool = False
    ordered_access: bool = False


@dataclass(frozen=True)
class Partition:
    policy_id: ClassVar[QosPolicyId] = QosPolicyId.PARTITION
    names: tuple[str, ...] = ("",)


@dataclass(frozen=True)
class DestinationOrder:
    policy_id: ClassVar[QosPolicyId] = QosPolicyId.DESTINATION_ORDER
    kind: DestinationOrderKind = DestinationOrderKind.BY_RECEPTION_TIMESTAMP


@dataclass(frozen=True)
class Ownership:
    policy_id: ClassVar[QosPolicyId] = QosPolicyId.OWNERSHIP
    kind: OwnershipKind = OwnershipKind.SHARED


@dataclass(frozen=True)
class OwnershipStrength:
    policy_id: ClassVar[QosPolicyId] = QosPolicyId.OWNERSHIP_STRENGTH
    value: int = 0


@dataclass(frozen=True)
class Deadline:
    policy_id: ClassVar[QosPolicyId] = QosPolicyId.DEADLINE
    period_ns: int = INFINITE_NS


@dataclass(frozen=True)
class LatencyBudget:
    policy_id: ClassVar[QosPolicyId] = QosPolicyId.LATENCY_BUDGET
    duration_ns: int = 0


@dataclass(frozen=True)
class TransportPriority:
    policy_id: ClassVar[QosPolicyId] = QosPolicyId.TRANSPORT_PRIORITY
    value: int = 0


@dataclass(frozen=True)
class TimeBasedFilter:
    policy_id: ClassVar[QosPolicyId] = QosPolicyId.TIME_BASED_FILTER
    minimum_separation_ns: int = 0


@dataclass(frozen=True)
class ResourceLimits:
    policy_id: ClassVar[QosPolicyId] = QosPolicyId.RESOURCE_LIMITS
    # None means unlimited.
    max_samples: Optional[int] = None
    max_instances: Optional[int] = None
    max_samples_per_instance: Optional[int] = None


@dataclass(frozen=True)
class UserData:
    policy_id: ClassVar[QosPolicyId] = QosPolicyId.USER_DATA
    value: bytes = b""


@dataclass(frozen=True)
class TopicData:
    policy_id: ClassVar[QosPolicyId] = QosPolicyId.TOPIC_DATA
    value: bytes = b""


@dataclass(frozen=True)
class GroupData:
    policy_id: ClassVar[QosPolicyId] = QosPolicyId.GROUP_DATA
    value: bytes = b""


QosValue = Union[
    Reliability, Durability, DurabilityService, Lifespan, History, Presentation,
    Partition, DestinationOrder, Ownership, OwnershipStrength, Deadline,
    LatencyBudget, TransportPriority, TimeBasedFilter, ResourceLimits,
    UserData, TopicData, GroupData,
]

_VALUE_TYPES: dict[QosPolicyId, type] = {
    cls.policy_id: cls
    for cls in (
        Reliability, Durability, DurabilityService, Lifespan, History,
        Presentation, Partition, DestinationOrder, Ownership, OwnershipStrength,
        Deadline, LatencyBudget, TransportPriority, TimeBasedFilter,
        ResourceLimits, UserData, TopicData, GroupData,
    )
}


def default_value(policy_id: QosPolicyId) -> QosValue:
    """The value an absent policy stands for."""
    return _VALUE_TYPES[policy_id]()


def value_errors(value: QosValue) -> list[str]:
    """Violations of a single policy value's own invariants."""
    errors = []
    pid = value.policy_id
    if isinstance(value, History):
        if value.kind == HistoryKind.KEEP_LAST and value.depth < 1:
            errors.append("HISTORY KEEP_LAST depth must be >= 1")
    elif isinstance(value, ResourceLimits):
        for name in ("max_samples", "max_instances", "max_samples_per_instance"):
            limit = getattr(value, name)
            if limit is not None and limit < 1:
                errors.append(f"RESOURCE_LIMITS {name} must be >= 1 or unlimited")
        if (value.max_samples is not None
                and value.max_samples_per_instance is not None
                and value.max_samples < value.max_samples_per_instance):
            errors.append("RESOURCE_LIMITS max_samples must be >= max_samples_per_instance")
    elif isinstance(value, (Lifespan, LatencyBudget)):
        if value.duration_ns < 0:
            errors.append(f"{pid.name} duration must be >= 0")
    elif isinstance(value, Deadline):
        if value.period_ns < 0:
            errors.append("DEADLINE period must be >= 0")
    elif isinstance(value, TimeBasedFilter):
        if value.minimum_separation_ns < 0:
            errors.append("TIME_BASED_FILTER minimum_separation must be >= 0")
    elif isinstance(value, DurabilityService):
        if value.cleanup_delay_ns < 0:
            errors.append("DURABILITY_SERVICE cleanup_delay must be >= 0")
    elif isinstance(value, Partition):
        if not all(isinstance(n, str) for n in value.names):
            errors.append("PARTITION names must be text")
    return errors


# ---------------------------------------------------------------------------
# Profiles

class QosError(Exception):
    pass


class ImmutablePolicyError(QosError):
    pass


class NotApplicableError(QosError):
    pass


@dataclass(frozen=True)
class QosProfile:
    """Immutable policy snapshot for one entity. Absent policy means default."""

    entity_kind: EntityKind
    policies: Mapping[QosPolicyId, QosValue] = field(default_factory=dict)
    enabled: bool = False

    def value(self, policy_id: QosPolicyId) -> QosValue:
        return self.policies.get(policy_id, default_value(policy_id))

    def with_value(self, value: QosValue) -> "QosProfile":
        policies = dict(self.policies)
        policies[value.policy_id] = value
        return QosProfile(self.entity_kind, policies, self.enabled)

    def enable(self) -> "QosProfile":
        return QosProfile(self.entity_kind, dict(self.policies), True)


def profile(entity_kind: EntityKind, values: Iterable[QosValue] = (),
            enabled: bool = False) -> QosProfile:
    policies: dict[QosPolicyId, QosValue] = {}
    for value in values:
        policies[value.policy_id] = value
    return QosProfile(entity_kind, policies, enabled)


def validate_profile(prof: QosProfile,
                     applicable_kinds: Optional[frozenset[EntityKind]] = None) -> list[str]:
    """All validation errors for a profile; empty list means valid.

    ``applicable_kinds`` widens the applicability check for collapsed entity
    models (a writer that also plays the publisher role); by default only the
    profile's own entity kind counts.
    """
    kinds = applicable_kinds if applicable_kinds is not None else frozenset({prof.entity_kind})
    errors = []
    for pid, value in prof.policies.items():
        meta = policy_meta(pid)
        if not (meta.applicability & kinds):
            errors.append(f"{pid.name} not applicable to {prof.entity_kind.value}")
        if type(value) is not _VALUE_TYPES[pid]:
            errors.append(f"{pid.name} carries a value of the wrong variant")
            continue
        errors.extend(value_errors(value))
    # Cross-policy: a reader's filter separation cannot exceed its deadline.
    if EntityKind.DATA_READER in kinds:
        tbf = prof.policies.get(QosPolicyId.TIME_BASED_FILTER)
        deadline = prof.value(QosPolicyId.DEADLINE)
        if tbf is not None and tbf.minimum_separation_ns > deadline.period_ns:
            errors.append("TIME_BASED_FILTER minimum_separation exceeds DEADLINE period")
    return errors


def set_policy(prof: QosProfile, policy_id: QosPolicyId, value: QosValue) -> QosProfile:
    """Store a policy value, enforcing applicability and changeability.

    Raises ``ImmutablePolicyError`` when the entity is enabled and the policy
    is not modifiable; raises ``NotApplicableError`` on entity kind mismatch.
    """
    if value.policy_id is not policy_id:
        raise ValueError(f"value variant {type(value).__name__} does not match {policy_id.name}")
    meta = policy_meta(policy_id)
    if prof.entity_kind not in meta.applicability:
        raise NotApplicableError(f"{policy_id.name} not applicable to {prof.entity_kind.value}")
    if prof.enabled and not meta.modifiable:
        raise ImmutablePolicyError(f"{policy_id.name} cannot change after enable")
    return prof.with_value(value)


# ---------------------------------------------------------------------------
# Request/offered compatibility

@dataclass(frozen=True)
class PolicyViolation:
    policy_id: QosPolicyId
    offered: QosValue
    requested: QosValue


@dataclass(frozen=True)
class CompatibilityReport:
    violations: tuple[PolicyViolation, ...] = ()

    @property
    def compatible(self) -> bool:
        return not self.violations

    def describe(self) -> str:
        if self.compatible:
            return "compatible"
        parts = [
            f"{v.policy_id.name}: offered {v.offered} < requested {v.requested}"
            for v in self.violations
        ]
        return "; ".join(parts)


def check_compatibility(offered: QosProfile, requested: QosProfile) -> CompatibilityReport:
    """Evaluate the request/offered contract between a writer-side profile and
    a reader-side profile.

    Only negotiated (RxO yes) policies can produce violations. Kinds with a
    declared strength ordering are compatible when the offer is at least the
    request; budget-style durations are compatible when the offer is at most
    the request; ownership kinds must match exactly.
    """
    violations = []

    def check(pid: QosPolicyId, ok) -> None:
        o = offered.value(pid)
        r = requested.value(pid)
        if not ok(o, r):
            violations.append(PolicyViolation(pid, o, r))

    check(QosPolicyId.RELIABILITY, lambda o, r: o.kind >= r.kind)
    check(QosPolicyId.DURABILITY, lambda o, r: o.kind >= r.kind)
    check(QosPolicyId.DESTINATION_ORDER, lambda o, r: o.kind >= r.kind)
    check(QosPolicyId.PRESENTATION, lambda o, r: (
        o.access_scope >= r.access_scope
        and (o.coherent_access or not r.coherent_access)
        and (o.ordered_access or not r.ordered_access)))
    check(QosPolicyId.DEADLINE, lambda o, r: o.period_ns <= r.period_ns)
    check(QosPolicyId.LATENCY_BUDGET, lambda o, r: o.duration_ns <= r.duration_ns)
    check(QosPolicyId.OWNERSHIP, lambda o, r: o.kind == r.kind)
    return CompatibilityReport(tuple(violations))


def partitions_intersect(a: Iterable[str], b: Iterable[str]) -> bool:
    """Partition match rule: name lists intersect by exact text equality; an
    empty list stands for the single default name ""."""
    sa = set(a) or {""}
    sb = set(b) or {""}
    return not sa.isdisjoint(sb)


# ---------------------------------------------------------------------------
# Profile files: line-oriented "policy.key = value" text

class QosFileError(QosError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


def _parse_duration(text: str) -> int:
    if text.lower() == "infinite":
        return INFINITE_NS
    return int(text)


def _parse_limit(text: str) -> Optional[int]:
    if text.lower() == "unlimited":
        return None
    return int(text)


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_enum(enum_cls, text: str):
    try:
        return enum_cls[text.strip().upper()]
    except KeyError:
        names = ", ".join(m.name for m in enum_cls)
        raise ValueError(f"expected one of {names}, got {text!r}") from None


# key -> (policy id, field name, parser)
_FILE_KEYS = {
    "reliability.kind": (QosPolicyId.RELIABILITY, "kind", lambda t: _parse_enum(ReliabilityKind, t)),
    "durability.kind": (QosPolicyId.DURABILITY, "kind", lambda t: _parse_enum(DurabilityKind, t)),
    "durability_service.cleanup_delay_ns": (QosPolicyId.DURABILITY_SERVICE, "cleanup_delay_ns", _parse_duration),
    "lifespan.duration_ns": (QosPolicyId.LIFESPAN, "duration_ns", _parse_duration),
    "history.kind": (QosPolicyId.HISTORY, "kind", lambda t: _parse_enum(HistoryKind, t)),
    "history.depth": (QosPolicyId.HISTORY, "depth", int),
    "presentation.access_scope": (QosPolicyId.PRESENTATION, "access_scope", lambda t: _parse_enum(AccessScope, t)),
    "presentation.coherent_access": (QosPolicyId.PRESENTATION, "coherent_access", _parse_bool),
    "presentation.ordered_access": (QosPolicyId.PRESENTATION, "ordered_access", _parse_bool),
    "partition.names": (QosPolicyId.PARTITION, "names", lambda t: tuple(n.strip() for n in t.split(","))),
    "destination_order.kind": (QosPolicyId.DESTINATION_ORDER, "kind", lambda t: _parse_enum(DestinationOrderKind, t)),
    "ownership.kind": (QosPolicyId.OWNERSHIP, "kind", lambda t: _parse_enum(OwnershipKind, t)),
    "ownership_strength.value": (QosPolicyId.OWNERSHIP_STRENGTH, "value", int),
    "deadline.period_ns": (QosPolicyId.DEADLINE, "period_ns", _parse_duration),
    "latency_budget.duration_ns": (QosPolicyId.LATENCY_BUDGET, "duration_ns", _parse_duration),
    "transport_priority.value": (QosPolicyId.TRANSPORT_PRIORITY, "value", int),
    "time_based_filter.minimum_separation_ns": (QosPolicyId.TIME_BASED_FILTER, "minimum_separation_ns", _parse_duration),
    "resource_limits.max_samples": (QosPolicyId.RESOURCE_LIMITS, "max_samples", _parse_limit),
    "resource_limits.max_instances": (QosPolicyId.RESOURCE_LIMITS, "max_instances", _parse_limit),
    "resource_limits.max_samples_per_instance": (QosPolicyId.RESOURCE_LIMITS, "max_samples_per_instance", _parse_limit),
    "user_data.hex": (QosPolicyId.USER_DATA, "value", bytes.fromhex),
    "topic_data.hex": (QosPolicyId.TOPIC_DATA, "value", bytes.fromhex),
    "group_data.hex": (QosPolicyId.GROUP_DATA, "value", bytes.fromhex),
}


def parse_qos_settings(text: str) -> dict[QosPolicyId, QosValue]:
    """Parse a profile file into policy values.

    Lines look like ``reliability.kind = RELIABLE``; ``#`` starts a comment;
    unknown keys raise ``QosFileError``.
    """
    fields_by_policy: dict[QosPolicyId, dict[str, object]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise QosFileError(lineno, f"expected 'key = value', got {raw.strip()!r}")
        key, _, value_text = line.partition("=")
        key = key.strip().lower()
        value_text = value_text.strip()
        if key not in _FILE_KEYS:
            raise QosFileError(lineno, f"unknown key {key!r}")
        pid, field_name, parser = _FILE_KEYS[key]
        try:
            parsed = parser(value_text)
        except ValueError as exc:
            raise QosFileError(lineno, f"{key}: {exc}") from None
        fields_by_policy.setdefault(pid, {})[field_name] = parsed

    settings: dict[QosPolicyId, QosValue] = {}
    for pid, kwargs in fields_by_policy.items():
        settings[pid] = _VALUE_TYPES[pid](**kwargs)
    return settings


def load_qos_file(path: str) -> dict[QosPolicyId, QosValue]:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_qos_settings(handle.read())


def settings_for(settings: Mapping[QosPolicyId, QosValue],
                 kinds: frozenset[EntityKind]) -> dict[QosPolicyId, QosValue]:
    """Subset of settings applicable to any of the given entity kinds; lets
    one profile file feed writer, reader and topic creation."""
    return {
        pid: value for pid, value in settings.items()
        if policy_meta(pid).applicability & kinds
    }
