"""Synthetic DNS / NTP / WireGuard-shaped traffic and the reflection harness.

Payloads have the right shape on the wire (ports, lengths, type fields) but
carry no real protocol session.
"""
from __future__ import annotations

import ipaddress
import random
import struct
import time
from collections import Counter, deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

from .keyring import KeyManager
from .packets import (
    PROTO_UDP,
    IPv4Packet,
    IPv6Packet,
    build_udp,
    finalize_udp4,
    finalize_udp6,
    udp_fields,
)
from .pipeline import Drop, ForwardV4, ForwardV6, Pipeline
from .translator import ServerMap, load_server_map

__all__ = [
    "PROTOCOLS",
    "dns_query",
    "ntp_request",
    "wireguard_data",
    "generate_traffic",
    "synthetic_server_map",
    "parse_gen_spec",
    "server_reply",
    "ReflectionResult",
    "reflect",
    "simulate_peer_table",
]

PROTOCOLS = {"dns": 53, "ntp": 123, "wireguard": 51820}

_LABEL_CHARS = "abcdefghijklmnopqrstuvwxyz0123456789"


def dns_query(rng: random.Random) -> bytes:
    """A single-question, recursion-desired A query for a random name."""
    labels = [
        "".join(rng.choice(_LABEL_CHARS) for _ in range(rng.randint(3, 12)))
        for _ in range(rng.randint(1, 3))
    ] + [rng.choice(("com", "net", "org"))]
    qname = b"".join(bytes([len(s)]) + s.encode() for s in labels) + b"\x00"
    header = struct.pack("!HHHHHH", rng.getrandbits(16), 0x0100, 1, 0, 0, 0)
    return header + qname + struct.pack("!HH", 1, 1)


def ntp_request(rng: random.Random) -> bytes:
    """48-byte NTPv4 client (mode 3) packet with a random transmit stamp."""
    body = bytearray(48)
    body[0] = (0 << 6) | (4 << 3) | 3
    body[40:48] = rng.randbytes(8)
    return bytes(body)


def wireguard_data(rng: random.Random, receiver: int | None = None, counter: int | None = None) -> bytes:
    """Transport-data message: type 4, receiver index, counter, sealed data.

    The sealed part is random bytes of a plausible length (16-byte padded
    plaintext plus the 16-byte tag).
    """
    receiver = rng.getrandbits(32) if receiver is None else receiver
    counter = rng.getrandbits(32) if counter is None else counter
    sealed = rng.randbytes(16 * rng.randint(1, 8) + 16)
    return struct.pack("<IIQ", 4, receiver, counter) + sealed


_PAYLOADS = {"dns": dns_query, "ntp": ntp_request, "wireguard": wireguard_data}


def generate_traffic(
    proto: str,
    count: int,
    rng: random.Random,
    internal_prefix: ipaddress.IPv4Network,
    server_map: ServerMap,
) -> Iterator[IPv4Packet]:
    """Client packets from random hosts in ``internal_prefix`` to mapped servers."""
    if proto not in PROTOCOLS:
        raise ValueError(f"unknown protocol {proto!r}; choose from {sorted(PROTOCOLS)}")
    if count < 0:
        raise ValueError("count must be non-negative")
    net = ipaddress.IPv4Network(internal_prefix)
    base, host_bits = int(net.network_address), 32 - net.prefixlen
    servers = sorted(server_map.ip4_to_6)
    if not servers:
        raise ValueError("server map is empty")
    dport = PROTOCOLS[proto]
    make = _PAYLOADS[proto]
    for _ in range(count):
        src = base | rng.getrandbits(host_bits) if host_bits else base
        dst = rng.choice(servers)
        udp = finalize_udp4(src, dst, build_udp(rng.randint(1024, 65535), dport, make(rng)))
        yield IPv4Packet(
            src=src,
            dst=dst,
            protocol=PROTO_UDP,
            payload=udp,
            ttl=rng.randint(1, 255),
            tos=rng.getrandbits(8),
            identification=rng.getrandbits(16),
        )


def synthetic_server_map(count: int, rng: random.Random) -> ServerMap:
    """Random public-looking server pairs (stand-in for A/AAAA lookups)."""
    v4: set[int] = set()
    v6: set[int] = set()
    records = []
    while len(records) < count:
        a = rng.randint(int(ipaddress.IPv4Address("1.0.0.0")), int(ipaddress.IPv4Address("223.255.255.255")))
        b = (0x2001 << 112) | rng.getrandbits(112)
        if a in v4 or b in v6:
            continue
        v4.add(a)
        v6.add(b)
        records.append((a, b))
    return load_server_map(records)


def parse_gen_spec(spec: str) -> tuple[str, int]:
    """``"dns:100"`` -> ``("dns", 100)``."""
    proto, sep, count = spec.partition(":")
    if not sep or proto not in PROTOCOLS:
        raise ValueError(f"generator spec must look like <{'|'.join(PROTOCOLS)}>:<count>")
    try:
        n = int(count)
    except ValueError:
        raise ValueError(f"bad packet count in {spec!r}") from None
    if n < 0:
        raise ValueError("count must be non-negative")
    return proto, n


def server_reply(pkt: IPv6Packet, payload: bytes | None = None) -> IPv6Packet:
    """What a server sends back: endpoints and ports swapped."""
    if pkt.next_header != PROTO_UDP:
        return replace(pkt, src=pkt.dst, dst=pkt.src)
    sport, dport, _, _ = udp_fields(pkt.payload)
    data = pkt.payload[8:] if payload is None else payload
    udp = build_udp(dport, sport, data)
    return IPv6Packet(
        src=pkt.dst,
        dst=pkt.src,
        next_header=PROTO_UDP,
        payload=finalize_udp6(pkt.dst, pkt.src, udp),
        hop_limit=pkt.hop_limit,
        traffic_class=pkt.traffic_class,
    )


@dataclass
class ReflectionResult:
    sent: int = 0
    restored: int = 0
    mismatched: int = 0
    drops: Counter = field(default_factory=Counter)
    rotations: int = 0
    emitted: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def packets_per_second(self) -> float:
        return self.sent / self.elapsed if self.elapsed else 0.0


def reflect(
    packets: Iterable[IPv4Packet],
    pipeline: Pipeline,
    keys: KeyManager,
    rng: random.Random,
    *,
    rotate_every: int = 0,
    lag: int = 0,
    keep: bool = False,
) -> ReflectionResult:
    """Outbound, then a synthetic server reply, then inbound.

    Replies are held back by up to ``lag`` packets so some of them cross a
    rotation.  A reply is *restored* when the inbound packet returns to the
    original client address and port.  ``keep`` retains every emitted packet
    (both directions) in ``result.emitted`` for later inspection.
    """
    result = ReflectionResult()
    in_flight: deque = deque()
    start = time.perf_counter()

    def deliver(item):
        original, reply = item
        action = pipeline.inbound(reply, keys.snapshot())
        if isinstance(action, Drop):
            result.drops[action.reason.value] += 1
            return
        if not isinstance(action, ForwardV4):
            result.mismatched += 1
            return
        back = action.packet
        if keep:
            result.emitted.append(back)
        ok = back.dst == original.src and back.src == original.dst
        if original.protocol == PROTO_UDP:
            osport, odport, _, _ = udp_fields(original.payload)
            bsport, bdport, _, _ = udp_fields(back.payload)
            ok = ok and bdport == osport and bsport == odport
        if ok:
            result.restored += 1
        else:
            result.mismatched += 1

    for i, pkt in enumerate(packets):
        if rotate_every and i and i % rotate_every == 0:
            keys.rotate()
            result.rotations += 1
        result.sent += 1
        action = pipeline.outbound(pkt, keys.snapshot(), rng)
        if isinstance(action, Drop):
            result.drops[action.reason.value] += 1
            continue
        if not isinstance(action, ForwardV6):
            result.mismatched += 1
            continue
        if keep:
            result.emitted.append(action.packet)
        in_flight.append((pkt, server_reply(action.packet)))
        while len(in_flight) > lag:
            deliver(in_flight.popleft())
    while in_flight:
        deliver(in_flight.popleft())
    result.elapsed = time.perf_counter() - start
    return result


def simulate_peer_table(stream: Iterable[tuple[object, IPv6Packet]]) -> dict:
    """Server-side peer table: each peer maps to the source of its latest packet."""
    table: dict = {}
    for peer, pkt in stream:
        table[peer] = pkt.src
    return table
