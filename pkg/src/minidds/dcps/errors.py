"""Errors raised by entity creation and the write path."""

from __future__ import annotations


class InvalidQosError(Exception):
    """A profile failed validation for the entity it was given to."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


class InconsistentTopicError(Exception):
    """Topic name already registered with a different type name."""


class TransportUnavailableError(Exception):
    """The configured port or interface could not be bound."""


class SampleTooLargeError(Exception):
    """Serialized sample does not fit a single datagram."""
