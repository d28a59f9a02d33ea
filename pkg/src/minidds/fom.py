"""Federation object model import: XML to topic names and QoS.

HLA federations declare what they exchange in an object-model XML file:
object classes carrying attributes, interaction classes carrying
parameters, each member tagged with a transport class and optionally a
delivery order. This module reads that file with a deliberately small
XML subset (elements, attributes, text, comments; no namespaces, no
document type declarations) and turns every class member into a topic
whose reliability and destination-order policies mirror the tags.

Everything here is a pure function over immutable values. Unknown
elements and attributes do not fail the parse; they are skipped and
reported in ``ObjectModel.warnings`` so a caller can decide how loud to
be about them.
"""

from __future__ import annotations

import xml.parsers.expat
from dataclasses import dataclass, field
from typing import Iterable, Optional

from minidds import idl, qos

__all__ = [
    "FomError",
    "HLA_BLOB_IDL",
    "InteractionClass",
    "Member",
    "ObjectClass",
    "ObjectModel",
    "blob_type",
    "map_to_topics",
    "parse_fom",
    "parse_type_map",
]

TRANSPORTATIONS = ("HLAreliable", "HLAbestEffort")
ORDERS = ("TimeStamp", "Receive")
MODEL_TYPES = ("FOM", "SOM")

# Object models declare no payload layout, so bridged topics default to
# an opaque single-string record. A type map file can override this per
# topic.
HLA_BLOB_IDL = "struct HlaBlob { string payload; };"


class FomError(Exception):
    """Object-model rejection, pinned to a 1-based source line."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


@dataclass(frozen=True)
class Member:
    """One attribute or parameter: the unit that becomes a topic."""

    name: str
    transportation: str
    order: Optional[str] = None


@dataclass(frozen=True)
class ObjectClass:
    name: str
    attributes: tuple[Member, ...] = ()


@dataclass(frozen=True)
class InteractionClass:
    name: str
    parameters: tuple[Member, ...] = ()


@dataclass(frozen=True)
class ObjectModel:
    """Parsed federation object model.

    ``type`` is FOM for a federation-wide model or SOM for a single
    simulator's. ``warnings`` lists everything the parser skipped.
    """

    name: str
    type: str
    version: Optional[str] = None
    objects: tuple[ObjectClass, ...] = ()
    interactions: tuple[InteractionClass, ...] = ()
    warnings: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# Parsing

# Children the reader descends into, per parent element. The root
# element also carries free-form document metadata (dates, sponsors,
# authorship), so any root attribute beyond the interpreted three is
# accepted silently; elsewhere unknown attributes are warned about.
_CHILDREN = {
    None: {"objectModel"},
    "objectModel": {"objects", "interactions"},
    "objects": {"objectClass"},
    "interactions": {"interactionClass"},
    "objectClass": {"attribute"},
    "interactionClass": {"parameter"},
    "attribute": set(),
    "parameter": set(),
}

_MEMBER_ATTRS = {"name", "transportation", "order"}


class _Builder:
    """Expat callback target assembling an ObjectModel."""

    def __init__(self, parser: xml.parsers.expat.XMLParserType):
        self._parser = parser
        self._stack: list[str] = []
        self._skip_depth = 0
        self.warnings: list[str] = []
        self.root_attrs: Optional[dict[str, str]] = None
        self.objects: list[ObjectClass] = []
        self.interactions: list[InteractionClass] = []
        self._class_name: Optional[str] = None
        self._members: list[Member] = []
        self._member_names: set[str] = set()

    @property
    def _line(self) -> int:
        return self._parser.CurrentLineNumber

    def _fail(self, reason: str) -> None:
        raise FomError(self._line, reason)

    def _warn(self, what: str) -> None:
        self.warnings.append(f"line {self._line}: {what}")

    # -- expat handlers ------------------------------------------------

    def start(self, tag: str, attrs: dict[str, str]) -> None:
        if self._skip_depth:
            self._skip_depth += 1
            return
        parent = self._stack[-1] if self._stack else None
        if tag not in _CHILDREN.get(parent, set()):
            self._warn(f"ignored element <{tag}>")
            self._skip_depth = 1
            return
        self._stack.append(tag)
        if tag == "objectModel":
            if self.root_attrs is not None:
                self._fail("more than one objectModel element")
            self.root_attrs = dict(attrs)
        elif tag in ("objectClass", "interactionClass"):
            self._begin_class(tag, attrs)
        elif tag in ("attribute", "parameter"):
            self._add_member(tag, attrs)

    def end(self, tag: str) -> None:
        if self._skip_depth:
            self._skip_depth -= 1
            return
        self._stack.pop()
        if tag == "objectClass":
            self.objects.append(
                ObjectClass(self._class_name, tuple(self._members)))
            self._class_name = None
        elif tag == "interactionClass":
            self.interactions.append(
                InteractionClass(self._class_name, tuple(self._members)))
            self._class_name = None

    def text(self, data: str) -> None:
        if self._skip_depth or not data.strip():
            return
        self._warn(f"ignored text {data.strip()[:30]!r}")

    def doctype(self, *args) -> None:
        self._fail("document type declarations are not supported")

    # -- assembly ------------------------------------------------------

    def _begin_class(self, tag: str, attrs: dict[str, str]) -> None:
        name = attrs.get("name")
        if not name:
            self._fail(f"{tag} without a name attribute")
        section = self.objects if tag == "objectClass" else self.interactions
        if any(cls.name == name for cls in section):
            self._fail(f"duplicate {tag} name {name!r}")
        for key in attrs:
            if key != "name":
                self._warn(f"ignored attribute {key!r} on <{tag}>")
        self._class_name = name
        self._members = []
        self._member_names = set()

    def _add_member(self, tag: str, attrs: dict[str, str]) -> None:
        name = attrs.get("name")
        if not name:
            self._fail(f"{tag} without a name attribute")
        if name in self._member_names:
            self._fail(f"duplicate {tag} name {name!r} "
                       f"in class {self._class_name!r}")
        transportation = attrs.get("transportation")
        if transportation is None:
            self._fail(f"{tag} {name!r} without a transportation attribute")
        if transportation not in TRANSPORTATIONS:
            self._fail(f"transportation {transportation!r} is not one of "
                       f"{', '.join(TRANSPORTATIONS)}")
        order = attrs.get("order")
        if order is not None and order not in ORDERS:
            self._fail(f"order {order!r} is not one of {', '.join(ORDERS)}")
        for key in attrs:
            if key not in _MEMBER_ATTRS:
                self._warn(f"ignored attribute {key!r} on <{tag}>")
        self._member_names.add(name)
        self._members.append(Member(name, transportation, order))

    def finish(self) -> ObjectModel:
        if self.root_attrs is None:
            raise FomError(self._line, "no objectModel element")
        name = self.root_attrs.get("name")
        if not name:
            raise FomError(1, "objectModel without a name attribute")
        model_type = self.root_attrs.get("type", "FOM")
        if model_type not in MODEL_TYPES:
            raise FomError(
                1, f"type {model_type!r} is not one of {', '.join(MODEL_TYPES)}")
        return ObjectModel(
            name=name,
            type=model_type,
            version=self.root_attrs.get("version"),
            objects=tuple(self.objects),
            interactions=tuple(self.interactions),
            warnings=tuple(self.warnings),
        )


def parse_fom(source: str | bytes) -> ObjectModel:
    """Parse object-model XML; raises ``FomError`` with a line number on
    malformed markup or out-of-range transportation/order/type values."""
    parser = xml.parsers.expat.ParserCreate()
    builder = _Builder(parser)
    parser.StartElementHandler = builder.start
    parser.EndElementHandler = builder.end
    parser.CharacterDataHandler = builder.text
    parser.StartDoctypeDeclHandler = builder.doctype
    # Comments and processing instructions fall through unhandled, which
    # is exactly the tolerance the format needs.
    if isinstance(source, str):
        source = source.encode("utf-8")
    try:
        parser.Parse(source, True)
    except xml.parsers.expat.ExpatError as exc:
        raise FomError(
            exc.lineno, xml.parsers.expat.errors.messages[exc.code]) from None
    return builder.finish()


# ---------------------------------------------------------------------------
# Topic mapping


def _member_profile(member: Member) -> qos.QosProfile:
    reliability = (qos.ReliabilityKind.RELIABLE
                   if member.transportation == "HLAreliable"
                   else qos.ReliabilityKind.BEST_EFFORT)
    dest_order = (qos.DestinationOrderKind.BY_SOURCE_TIMESTAMP
                  if member.order == "TimeStamp"
                  else qos.DestinationOrderKind.BY_RECEPTION_TIMESTAMP)
    return qos.profile(qos.EntityKind.TOPIC, [
        qos.Reliability(reliability),
        qos.DestinationOrder(dest_order),
    ])


def map_to_topics(model: ObjectModel) -> list[tuple[str, qos.QosProfile]]:
    """One topic per class member, named ``<ClassName>.<memberName>``.

    HLAreliable maps to RELIABLE delivery, HLAbestEffort to BEST_EFFORT;
    a TimeStamp order maps to source-timestamp destination ordering and
    Receive (or no order at all) to reception ordering. Every other
    policy keeps its default.
    """
    topics: list[tuple[str, qos.QosProfile]] = []
    for cls in model.objects:
        for member in cls.attributes:
            topics.append((f"{cls.name}.{member.name}",
                           _member_profile(member)))
    for cls in model.interactions:
        for member in cls.parameters:
            topics.append((f"{cls.name}.{member.name}",
                           _member_profile(member)))
    return topics


def blob_type() -> idl.TypeDescriptor:
    """The default payload type for bridged topics."""
    return idl.parse_idl(HLA_BLOB_IDL)[0]


def parse_type_map(source: str) -> dict[str, str]:
    """Read a ``topic_name = idl_type_name`` override file.

    Blank lines and ``#`` comments are skipped; a repeated topic name or
    a line without ``=`` is an error (reported with its line number).
    """
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        topic, sep, type_name = line.partition("=")
        topic = topic.strip()
        type_name = type_name.strip()
        if not sep or not topic or not type_name:
            raise FomError(
                lineno, f"expected 'topic = type', got {line!r}")
        if topic in mapping:
            raise FomError(lineno, f"duplicate topic {topic!r}")
        mapping[topic] = type_name
    return mapping
