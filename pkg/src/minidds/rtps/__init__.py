"""Wire protocol, transports, delivery sessions, and discovery."""

from minidds.rtps import discovery, reliability, transport, wire

__all__ = ["discovery", "reliability", "transport", "wire"]
