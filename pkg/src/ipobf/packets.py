"""Minimal IPv4 / IPv6 / UDP header model.

Only what header translation needs: fixed headers, UDP, and the Internet
checksum.  Addresses are plain integers throughout.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

__all__ = [
    "MalformedPacket",
    "IPv4Packet",
    "IPv6Packet",
    "PROTO_UDP",
    "internet_checksum",
    "parse_ipv4",
    "parse_ipv6",
    "parse_ip",
    "build_udp",
    "udp_fields",
    "rewrite_udp",
    "udp_checksum4",
    "udp_checksum6",
    "finalize_udp4",
    "finalize_udp6",
]

PROTO_UDP = 17

_V4_HDR = struct.Struct("!BBHHHBBH4s4s")
_V6_HDR = struct.Struct("!IHBB16s16s")
_UDP_HDR = struct.Struct("!HHHH")


class MalformedPacket(ValueError):
    pass


def internet_checksum(data: bytes) -> int:
    """RFC 1071 checksum: complement of the ones'-complement sum of words."""
    if len(data) & 1:
        data += b"\x00"
    total = int.from_bytes(data, "big")
    # 2**16 == 1 (mod 0xFFFF), so the residue is the folded word sum; a
    # nonzero input whose sum folds to zero is ones'-complement 0xFFFF.
    folded = total % 0xFFFF
    if folded == 0 and total:
        folded = 0xFFFF
    return ~folded & 0xFFFF


@dataclass(frozen=True)
class IPv4Packet:
    src: int
    dst: int
    protocol: int
    payload: bytes
    ttl: int = 64
    tos: int = 0
    identification: int = 0
    flags: int = 0  # 3 bits: reserved, DF, MF
    frag_offset: int = 0
    options: bytes = b""

    @property
    def total_length(self) -> int:
        return 20 + len(self.options) + len(self.payload)

    @property
    def is_fragment(self) -> bool:
        return bool(self.flags & 0b001) or self.frag_offset != 0

    def header(self) -> bytes:
        ihl = 5 + len(self.options) // 4
        fields = (
            (4 << 4) | ihl,
            self.tos,
            self.total_length,
            self.identification,
            (self.flags << 13) | self.frag_offset,
            self.ttl,
            self.protocol,
            0,
            self.src.to_bytes(4, "big"),
            self.dst.to_bytes(4, "big"),
        )
        hdr = _V4_HDR.pack(*fields) + self.options
        csum = internet_checksum(hdr)
        return hdr[:10] + csum.to_bytes(2, "big") + hdr[12:]

    def to_bytes(self) -> bytes:
        return self.header() + self.payload


@dataclass(frozen=True)
class IPv6Packet:
    src: int
    dst: int
    next_header: int
    payload: bytes
    hop_limit: int = 64
    traffic_class: int = 0
    flow_label: int = 0

    @property
    def payload_length(self) -> int:
        return len(self.payload)

    def to_bytes(self) -> bytes:
        first = (6 << 28) | (self.traffic_class << 20) | self.flow_label
        return _V6_HDR.pack(
            first,
            len(self.payload),
            self.next_header,
            self.hop_limit,
            self.src.to_bytes(16, "big"),
            self.dst.to_bytes(16, "big"),
        ) + self.payload


def parse_ipv4(data: bytes) -> IPv4Packet:
    if len(data) < 20:
        raise MalformedPacket("truncated IPv4 header")
    vihl, tos, total, ident, frag, ttl, proto, _csum, src, dst = _V4_HDR.unpack_from(data)
    if vihl >> 4 != 4:
        raise MalformedPacket("not an IPv4 packet")
    hlen = (vihl & 0xF) * 4
    if hlen < 20 or total < hlen or len(data) < total:
        raise MalformedPacket("inconsistent IPv4 lengths")
    if internet_checksum(data[:hlen]) != 0:
        raise MalformedPacket("bad IPv4 header checksum")
    return IPv4Packet(
        src=int.from_bytes(src, "big"),
        dst=int.from_bytes(dst, "big"),
        protocol=proto,
        payload=bytes(data[hlen:total]),
        ttl=ttl,
        tos=tos,
        identification=ident,
        flags=frag >> 13,
        frag_offset=frag & 0x1FFF,
        options=bytes(data[20:hlen]),
    )


def parse_ipv6(data: bytes) -> IPv6Packet:
    if len(data) < 40:
        raise MalformedPacket("truncated IPv6 header")
    first, plen, nh, hops, src, dst = _V6_HDR.unpack_from(data)
    if first >> 28 != 6:
        raise MalformedPacket("not an IPv6 packet")
    if len(data) < 40 + plen:
        raise MalformedPacket("IPv6 payload shorter than its length field")
    return IPv6Packet(
        src=int.from_bytes(src, "big"),
        dst=int.from_bytes(dst, "big"),
        next_header=nh,
        payload=bytes(data[40:40 + plen]),
        hop_limit=hops,
        traffic_class=(first >> 20) & 0xFF,
        flow_label=first & 0xFFFFF,
    )


def parse_ip(data: bytes) -> IPv4Packet | IPv6Packet:
    if not data:
        raise MalformedPacket("empty packet")
    version = data[0] >> 4
    if version == 4:
        return parse_ipv4(data)
    if version == 6:
        return parse_ipv6(data)
    raise MalformedPacket(f"unknown IP version {version}")


# -- UDP --------------------------------------------------------------------

def build_udp(sport: int, dport: int, data: bytes) -> bytes:
    """UDP datagram with a zero checksum; see ``finalize_udp4/6``."""
    return _UDP_HDR.pack(sport, dport, 8 + len(data), 0) + data


def udp_fields(udp: bytes) -> tuple[int, int, int, int]:
    """``(sport, dport, length, checksum)``; validates the length field."""
    if len(udp) < 8:
        raise MalformedPacket("truncated UDP header")
    sport, dport, length, csum = _UDP_HDR.unpack_from(udp)
    if length != len(udp):
        raise MalformedPacket("UDP length does not match the datagram")
    return sport, dport, length, csum


def rewrite_udp(udp: bytes, sport: int | None = None, dport: int | None = None) -> bytes:
    """Replace ports; the checksum field is zeroed for later recomputation."""
    old_sport, old_dport, length, _ = _UDP_HDR.unpack_from(udp)
    return _UDP_HDR.pack(
        old_sport if sport is None else sport,
        old_dport if dport is None else dport,
        length,
        0,
    ) + udp[8:]


def udp_checksum4(src: int, dst: int, udp: bytes) -> int:
    pseudo = struct.pack("!IIBBH", src, dst, 0, PROTO_UDP, len(udp))
    csum = internet_checksum(pseudo + udp[:6] + b"\x00\x00" + udp[8:])
    return csum or 0xFFFF


def udp_checksum6(src: int, dst: int, udp: bytes) -> int:
    pseudo = src.to_bytes(16, "big") + dst.to_bytes(16, "big") + struct.pack(
        "!I3xB", len(udp), PROTO_UDP
    )
    csum = internet_checksum(pseudo + udp[:6] + b"\x00\x00" + udp[8:])
    return csum or 0xFFFF


def finalize_udp4(src: int, dst: int, udp: bytes) -> bytes:
    return udp[:6] + udp_checksum4(src, dst, udp).to_bytes(2, "big") + udp[8:]


def finalize_udp6(src: int, dst: int, udp: bytes) -> bytes:
    return udp[:6] + udp_checksum6(src, dst, udp).to_bytes(2, "big") + udp[8:]
