"""minidds: a small data-centric publish/subscribe middleware.

Applications declare typed, keyed topics, attach writers and readers
with QoS profiles, and let participants discover each other over UDP.
The layers mirror that split: ``qos`` holds the policy model, ``idl``
the type system, ``dcps`` the entity API, ``rtps`` the wire protocol,
``fom`` the federation-model import, and ``bench`` the measurement
tools.
"""

from minidds import clock, idl, qos
from minidds.dcps import (DataReader, DataWriter, DomainParticipant, Topic,
                          create_participant)

__version__ = "0.1.0"

__all__ = [
    "DataReader",
    "DataWriter",
    "DomainParticipant",
    "Topic",
    "__version__",
    "clock",
    "create_participant",
    "idl",
    "qos",
]
