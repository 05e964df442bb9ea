"""Stateless IPv4 <-> IPv6 header translation and the server address maps."""
from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from .packets import (
    PROTO_UDP,
    IPv4Packet,
    IPv6Packet,
    MalformedPacket,
    finalize_udp4,
    finalize_udp6,
    udp_fields,
)

__all__ = [
    "ServerMapError",
    "TranslationError",
    "ServerMap",
    "load_server_map",
    "read_server_map",
    "translate_4to6",
    "translate_6to4",
    "IPV6_EXTENSION_HEADERS",
]

# hop-by-hop, routing, fragment, AH, destination options, mobility, HIP,
# shim6, experimental
IPV6_EXTENSION_HEADERS = frozenset({0, 43, 44, 51, 60, 135, 139, 140, 253, 254})

_DF = 0b010


class ServerMapError(ValueError):
    pass


class TranslationError(ValueError):
    """Packet cannot be translated; ``reason`` names the drop cause."""

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


@dataclass(frozen=True)
class ServerMap:
    ip4_to_6: Mapping[int, int] = field(default_factory=dict)
    ip6_to_4: Mapping[int, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.ip4_to_6)


def load_server_map(records: Iterable[tuple]) -> ServerMap:
    """Build both directions from ``(ipv4, ipv6)`` pairs (ints or strings)."""
    fwd: dict[int, int] = {}
    rev: dict[int, int] = {}
    for rec in records:
        v4 = int(ipaddress.IPv4Address(rec[0]))
        v6 = int(ipaddress.IPv6Address(rec[1]))
        if v4 in fwd:
            raise ServerMapError(f"duplicate IPv4 address in record {rec!r}")
        if v6 in rev:
            raise ServerMapError(f"duplicate IPv6 address in record {rec!r}")
        fwd[v4] = v6
        rev[v6] = v4
    return ServerMap(MappingProxyType(fwd), MappingProxyType(rev))


def read_server_map(path: str | Path) -> ServerMap:
    """Lines of ``<ipv4>,<ipv6>``; blank lines and ``#`` comments skipped."""
    records = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise ServerMapError(f"{path}:{lineno}: expected '<ipv4>,<ipv6>'")
        try:
            ipaddress.IPv4Address(parts[0])
            ipaddress.IPv6Address(parts[1])
        except ValueError as exc:
            raise ServerMapError(f"{path}:{lineno}: {exc}") from None
        records.append((parts[0], parts[1]))
    return load_server_map(records)


def translate_4to6(
    pkt: IPv4Packet, new_src6: int, new_dst6: int, *, allow_non_udp: bool = True
) -> IPv6Packet:
    """Rewrite an IPv4 packet as IPv6.  TTL is copied, not decremented."""
    if pkt.is_fragment:
        raise TranslationError("fragment-unsupported", "fragmented IPv4 packets are not translated")
    payload = pkt.payload
    if pkt.protocol == PROTO_UDP:
        try:
            udp_fields(payload)
        except MalformedPacket as exc:
            raise TranslationError("malformed", str(exc)) from None
        payload = finalize_udp6(new_src6, new_dst6, payload)
    elif not allow_non_udp:
        raise TranslationError("non-udp", f"protocol {pkt.protocol} not translated")
    return IPv6Packet(
        src=new_src6,
        dst=new_dst6,
        next_header=pkt.protocol,
        payload=payload,
        hop_limit=pkt.ttl,
        traffic_class=pkt.tos,
    )


def translate_6to4(
    pkt: IPv6Packet, new_src4: int, new_dst4: int, *, allow_non_udp: bool = True
) -> IPv4Packet:
    """Rewrite an IPv6 packet as IPv4 with ID 0 and DF set."""
    if pkt.next_header in IPV6_EXTENSION_HEADERS:
        raise TranslationError(
            "unsupported-extension", f"IPv6 extension header {pkt.next_header} not supported"
        )
    payload = pkt.payload
    if pkt.next_header == PROTO_UDP:
        try:
            udp_fields(payload)
        except MalformedPacket as exc:
            raise TranslationError("malformed", str(exc)) from None
        payload = finalize_udp4(new_src4, new_dst4, payload)
    elif not allow_non_udp:
        raise TranslationError("non-udp", f"next header {pkt.next_header} not translated")
    if 20 + len(payload) > 0xFFFF:
        raise TranslationError("malformed", "payload too large for IPv4")
    return IPv4Packet(
        src=new_src4,
        dst=new_dst4,
        protocol=pkt.next_header,
        payload=payload,
        ttl=pkt.hop_limit,
        tos=pkt.traffic_class,
        identification=0,
        flags=_DF,
    )
