"""Outbound (encrypt + 4to6) and inbound (6to4 + decrypt) packet paths.

Both paths are pure functions of the packet, a key window snapshot, the
server map and the configuration; :class:`Pipeline` wraps them with the
per-outcome counters.
"""
from __future__ import annotations

import enum
import ipaddress
import random
import threading
from collections import Counter
from dataclasses import dataclass, replace
from typing import Union

from .addrcodec import EncodingLayout, NotOursError, decode, encode
from .cipher import CipherParams, decrypt, encrypt
from .keyring import ExpiredKeyError, RotationWindow, lookup, otp_for
from .packets import (
    PROTO_UDP,
    IPv4Packet,
    IPv6Packet,
    MalformedPacket,
    parse_ip,
    rewrite_udp,
    udp_fields,
)
from .translator import ServerMap, TranslationError, translate_4to6, translate_6to4

__all__ = [
    "DropReason",
    "PipelineConfig",
    "ForwardV6",
    "ForwardV4",
    "PassThrough",
    "Drop",
    "Pipeline",
    "process_outbound",
    "process_inbound",
    "split_plaintext",
]


class DropReason(str, enum.Enum):
    UNMAPPED = "unmapped"
    EXPIRED = "expired"
    FOREIGN_PREFIX = "foreign-prefix"
    ADDRESS_VALIDATION = "address-validation"
    FRAGMENT = "fragment-unsupported"
    UNSUPPORTED_EXTENSION = "unsupported-extension"
    NON_UDP = "non-udp"
    MALFORMED = "malformed"


PASS_THROUGH = "pass-through"
DROP = "drop"


@dataclass(frozen=True)
class PipelineConfig:
    layout: EncodingLayout
    internal_prefix: ipaddress.IPv4Network
    port_obfuscation: bool = False
    unmapped_dst_policy: str = PASS_THROUGH
    non_udp_policy: str = PASS_THROUGH
    # off = forward whatever the ciphertext decrypts to (blind forwarding)
    validate_decrypted: bool = True

    def __post_init__(self):
        if not isinstance(self.internal_prefix, ipaddress.IPv4Network):
            object.__setattr__(self, "internal_prefix", ipaddress.IPv4Network(self.internal_prefix))
        for name in ("unmapped_dst_policy", "non_udp_policy"):
            if getattr(self, name) not in (PASS_THROUGH, DROP):
                raise ValueError(f"{name} must be {PASS_THROUGH!r} or {DROP!r}")
        if self.port_obfuscation and self.layout.l < 16:
            raise ValueError("port obfuscation needs at least 16 bits of padding")

    @property
    def n(self) -> int:
        return self.layout.cipher_width


@dataclass(frozen=True)
class ForwardV6:
    packet: IPv6Packet


@dataclass(frozen=True)
class ForwardV4:
    packet: IPv4Packet


@dataclass(frozen=True)
class PassThrough:
    packet: Union[IPv4Packet, IPv6Packet, bytes]


@dataclass(frozen=True)
class Drop:
    reason: DropReason
    detail: str = ""


Action = Union[ForwardV6, ForwardV4, PassThrough, Drop]


def split_plaintext(m: int, l: int) -> tuple[int, int]:
    """Cipher input is the IPv4 address in the high 32 bits, padding below."""
    return m >> l, m & ((1 << l) - 1)


def _pad_prefix(pad: int, l: int) -> int:
    return pad >> (l - 16)


def _translation_drop(exc: TranslationError) -> Drop:
    return Drop(DropReason(exc.reason), str(exc))


def process_outbound(
    pkt: IPv4Packet,
    window: RotationWindow,
    server_map: ServerMap,
    cfg: PipelineConfig,
    params: CipherParams,
    rng,
    *,
    pad: int | None = None,
) -> Action:
    """Encrypt the source address and translate to IPv6.

    ``pad`` overrides the random padding draw (for reproducing a packet).
    """
    dst6 = server_map.ip4_to_6.get(pkt.dst)
    if dst6 is None:
        if cfg.unmapped_dst_policy == PASS_THROUGH:
            return PassThrough(pkt)
        return Drop(DropReason.UNMAPPED, "destination has no IPv6 counterpart")
    if pkt.is_fragment:
        return Drop(DropReason.FRAGMENT, "fragmented IPv4 packets are not translated")

    l = cfg.layout.l
    if pad is None:
        pad = rng.getrandbits(l) if l else 0
    keyset = window.current
    c = encrypt((pkt.src << l) | pad, keyset.keys, params)

    if cfg.port_obfuscation and pkt.protocol == PROTO_UDP:
        try:
            sport = udp_fields(pkt.payload)[0]
        except MalformedPacket as exc:
            return Drop(DropReason.MALFORMED, str(exc))
        masked = sport ^ otp_for(keyset, _pad_prefix(pad, l))
        pkt = replace(pkt, payload=rewrite_udp(pkt.payload, sport=masked))

    src6 = encode(cfg.layout, keyset.version, c)
    try:
        out = translate_4to6(
            pkt, src6, dst6, allow_non_udp=cfg.non_udp_policy == PASS_THROUGH
        )
    except TranslationError as exc:
        return _translation_drop(exc)
    return ForwardV6(out)


def process_inbound(
    pkt: IPv6Packet,
    window: RotationWindow,
    server_map: ServerMap,
    cfg: PipelineConfig,
    params: CipherParams,
    diagnostics: Counter | None = None,
) -> Action:
    """Decrypt the destination address and translate back to IPv4."""
    try:
        version, c = decode(cfg.layout, pkt.dst, diagnostics)
    except NotOursError:
        return PassThrough(pkt)
    try:
        keyset = lookup(window, version)
    except ExpiredKeyError as exc:
        return Drop(DropReason.EXPIRED, str(exc))

    l = cfg.layout.l
    addr4, pad = split_plaintext(decrypt(c, keyset.keys, params), l)
    net = cfg.internal_prefix
    if cfg.validate_decrypted and addr4 & int(net.netmask) != int(net.network_address):
        return Drop(DropReason.ADDRESS_VALIDATION, "decrypted address outside the trusted network")

    src4 = server_map.ip6_to_4.get(pkt.src)
    if src4 is None:
        return Drop(DropReason.UNMAPPED, "reply source has no IPv4 counterpart")

    if cfg.port_obfuscation and pkt.next_header == PROTO_UDP:
        try:
            dport = udp_fields(pkt.payload)[1]
        except MalformedPacket as exc:
            return Drop(DropReason.MALFORMED, str(exc))
        restored = dport ^ otp_for(keyset, _pad_prefix(pad, l))
        pkt = replace(pkt, payload=rewrite_udp(pkt.payload, dport=restored))

    try:
        out = translate_6to4(
            pkt, src4, addr4, allow_non_udp=cfg.non_udp_policy == PASS_THROUGH
        )
    except TranslationError as exc:
        return _translation_drop(exc)
    return ForwardV4(out)


class Pipeline:
    """Pipeline state: configuration, cipher material, and counters.

    Counters are the only mutable part and are guarded by a lock so several
    workers can share one instance.
    """

    def __init__(self, cfg: PipelineConfig, server_map: ServerMap, params: CipherParams):
        if params.n != cfg.n:
            raise ValueError(f"cipher width {params.n} does not match layout width {cfg.n}")
        self.cfg = cfg
        self.server_map = server_map
        self.params = params
        self._lock = threading.Lock()
        self.offered = 0
        self.outcomes: Counter = Counter()
        self.drops: Counter = Counter()
        self.diagnostics: Counter = Counter()

    def record(self, action: Action) -> Action:
        with self._lock:
            self.offered += 1
            if isinstance(action, Drop):
                self.drops[action.reason.value] += 1
            else:
                self.outcomes[type(action).__name__] += 1
        return action

    def outbound(self, pkt: IPv4Packet, window: RotationWindow, rng=random, **kw) -> Action:
        return self.record(
            process_outbound(pkt, window, self.server_map, self.cfg, self.params, rng, **kw)
        )

    def inbound(self, pkt: IPv6Packet, window: RotationWindow) -> Action:
        diag: Counter = Counter()
        action = process_inbound(pkt, window, self.server_map, self.cfg, self.params, diag)
        if diag:
            with self._lock:
                self.diagnostics.update(diag)
        return self.record(action)

    def process(self, raw: bytes, window: RotationWindow, rng=random) -> Action:
        """Classify a raw IP packet by version and send it down one path."""
        try:
            pkt = parse_ip(raw)
        except MalformedPacket as exc:
            return self.record(Drop(DropReason.MALFORMED, str(exc)))
        if isinstance(pkt, IPv4Packet):
            return self.outbound(pkt, window, rng)
        return self.inbound(pkt, window)

    def stats(self) -> dict:
        with self._lock:
            return {
                "offered": self.offered,
                "forwarded_v6": self.outcomes["ForwardV6"],
                "forwarded_v4": self.outcomes["ForwardV4"],
                "passed": self.outcomes["PassThrough"],
                "drops": dict(sorted(self.drops.items())),
                "diagnostics": dict(sorted(self.diagnostics.items())),
            }
