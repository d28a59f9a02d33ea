"""Benchmark payload shapes.

Every benchmark sample carries its sequence number and send timestamp
inside the payload, which costs 12 bytes; anything beyond that is
padding. Sizes below the floor are padded up to it (and say so), sizes
13 to 15 pad with single bytes, and larger ones use one string field
whose length makes the serialized form land exactly on the requested
size.
"""

from __future__ import annotations

from dataclasses import dataclass

from minidds import idl
from minidds.bench.errors import BenchConfigError

MIN_PAYLOAD = 12
MAX_PAYLOAD = 60000

# 8 (t_send) + 4 (seq) fixed header; string padding adds a 4-byte length
# prefix, so the string variant starts at 16 serialized bytes.
_STRING_BASE = 16


@dataclass(frozen=True)
class PayloadShape:
    requested: int
    size: int  # actual serialized size
    descriptor: idl.TypeDescriptor

    @property
    def padded(self) -> bool:
        return self.size != self.requested

    @property
    def note(self) -> str:
        if not self.padded:
            return ""
        return (f"requested {self.requested} B padded to the "
                f"{MIN_PAYLOAD} B minimum")


def shape_for(size: int) -> PayloadShape:
    """Build the type for one payload size; rejects sizes past
    ``MAX_PAYLOAD`` or below zero."""
    if size < 0:
        raise BenchConfigError(f"payload size {size} is negative")
    if size > MAX_PAYLOAD:
        raise BenchConfigError(
            f"payload size {size} exceeds the {MAX_PAYLOAD} byte limit")
    actual = max(size, MIN_PAYLOAD)
    fields = ["long long t_send;", "unsigned long seq;"]
    if MIN_PAYLOAD < actual < _STRING_BASE:
        fields.extend(f"octet pad{i};" for i in range(actual - MIN_PAYLOAD))
    elif actual >= _STRING_BASE:
        fields.append("string pad;")
    source = f"struct Bench{actual} {{ {' '.join(fields)} }};"
    descriptor = idl.parse_idl(source)[0]
    return PayloadShape(size, actual, descriptor)


def make_payload(shape: PayloadShape, sequence: int,
                 t_send_ns: int) -> idl.Sample:
    values: dict[str, object] = {"t_send": t_send_ns, "seq": sequence}
    for f in shape.descriptor.fields[2:]:
        values[f.name] = "x" * (shape.size - _STRING_BASE) if f.name == "pad" else 0
    sample = idl.make_sample(shape.descriptor, values)
    assert idl.serialized_size(shape.descriptor, sample) == shape.size
    return sample


def read_header(sample: idl.Sample) -> tuple[int, int]:
    """(sequence, t_send_ns) from a benchmark sample."""
    return sample.values[1], sample.values[0]
