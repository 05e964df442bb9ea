"""Packing ciphertext into IPv6 source addresses.

Standard layout, high bits to low::

    | prefix (d) | metadata (128 - d - 32 - l) | ciphertext (32 + l) |

The key-set version sits in the top two metadata bits; the rest of the
metadata region is reserved and written as zero.

Subnet layout, for protecting hosts inside a reserved IPv6 /96::

    | network (64) | subnet id (32) | host (32) |

The low 32 host bits are encrypted with up to 30 bits of padding.  On the
wire the subnet id field carries the version (top two bits) and the
ciphertext bits above 32 (lowest bits); decoding hands back the static
subnet id.
"""
from __future__ import annotations

import ipaddress
from collections import Counter
from dataclasses import dataclass

__all__ = [
    "LayoutError",
    "NotOursError",
    "EncodingLayout",
    "V6SubnetLayout",
    "encode",
    "decode",
    "encode_v6_subnet",
    "decode_v6_subnet",
    "restore_v6_subnet",
    "host_bits",
]

VERSION_BITS = 2
_ALL = (1 << 128) - 1


class LayoutError(ValueError):
    """Layout parameters do not add up to a usable 128-bit address."""


class NotOursError(ValueError):
    """Address does not sit under the configured prefix."""


@dataclass(frozen=True)
class EncodingLayout:
    prefix: int  # 128-bit network address, host bits zero
    d: int
    l: int

    def __post_init__(self):
        if not 0 <= self.d <= 128 - 32:
            raise LayoutError(f"prefix length {self.d} leaves no room for a ciphertext")
        if self.l < 0:
            raise LayoutError("padding width cannot be negative")
        if self.meta_width < VERSION_BITS:
            raise LayoutError(
                f"/{self.d} prefix with {self.l}-bit padding leaves {self.meta_width} "
                f"metadata bits; the version needs {VERSION_BITS}"
            )
        if self.prefix & ~self.prefix_mask & _ALL:
            raise LayoutError("prefix has bits set below its length")

    @classmethod
    def from_config(cls, prefix: str, mode: int) -> "EncodingLayout":
        """``prefix`` like ``"2001:db8:1:2::/64"``; ``mode`` is 56 or 64."""
        if mode not in (56, 64):
            raise LayoutError(f"mode must be 56 or 64, got {mode}")
        try:
            net = ipaddress.IPv6Network(prefix)
        except ValueError as exc:
            raise LayoutError(str(exc)) from None
        return cls(int(net.network_address), net.prefixlen, mode - 32)

    @property
    def cipher_width(self) -> int:
        return 32 + self.l

    @property
    def meta_width(self) -> int:
        return 128 - self.d - self.cipher_width

    @property
    def prefix_mask(self) -> int:
        return (_ALL << (128 - self.d)) & _ALL

    @property
    def version_shift(self) -> int:
        return 128 - self.d - VERSION_BITS

    @property
    def reserved_mask(self) -> int:
        width = self.meta_width - VERSION_BITS
        return ((1 << width) - 1) << self.cipher_width


def encode(layout: EncodingLayout, version: int, ciphertext: int) -> int:
    if not 0 <= version < 4:
        raise ValueError(f"version {version} does not fit in two bits")
    if ciphertext >> layout.cipher_width:
        raise ValueError(f"ciphertext wider than {layout.cipher_width} bits")
    return layout.prefix | (version << layout.version_shift) | ciphertext


def decode(
    layout: EncodingLayout, addr: int, diagnostics: Counter | None = None
) -> tuple[int, int]:
    """Return ``(version, ciphertext)``.

    Nonzero reserved bits do not stop decoding; they are tallied under
    ``"reserved_nonzero"`` in ``diagnostics`` when one is passed.
    """
    if addr & layout.prefix_mask != layout.prefix:
        raise NotOursError(f"{ipaddress.IPv6Address(addr)} is outside the configured prefix")
    if diagnostics is not None and addr & layout.reserved_mask:
        diagnostics["reserved_nonzero"] += 1
    version = (addr >> layout.version_shift) & 0b11
    return version, addr & ((1 << layout.cipher_width) - 1)


@dataclass(frozen=True)
class V6SubnetLayout:
    network: int  # top 64 bits of the /64, as a 128-bit value
    static_subnet_id: int
    pad_width: int

    def __post_init__(self):
        if not 0 <= self.pad_width <= 30:
            raise LayoutError(f"subnet mode allows at most 30 padding bits, got {self.pad_width}")
        if not 0 <= self.static_subnet_id < 1 << 32:
            raise LayoutError("subnet id must fit in 32 bits")
        if self.network & ((1 << 64) - 1):
            raise LayoutError("network must be a /64 with the low 64 bits zero")

    @property
    def cipher_width(self) -> int:
        return 32 + self.pad_width

    @property
    def reserved_net(self) -> int:
        return self.network | (self.static_subnet_id << 32)


def host_bits(layout: V6SubnetLayout, addr: int) -> int:
    """Low 32 bits of an address inside the reserved /96 (the plaintext)."""
    if addr >> 32 != layout.reserved_net >> 32:
        raise NotOursError(f"{ipaddress.IPv6Address(addr)} is outside the reserved /96")
    return addr & 0xFFFFFFFF


def encode_v6_subnet(layout: V6SubnetLayout, version: int, ciphertext: int) -> int:
    if not 0 <= version < 4:
        raise ValueError(f"version {version} does not fit in two bits")
    if ciphertext >> layout.cipher_width:
        raise ValueError(f"ciphertext wider than {layout.cipher_width} bits")
    subnet = (version << 30) | (ciphertext >> 32)
    return layout.network | (subnet << 32) | (ciphertext & 0xFFFFFFFF)


def decode_v6_subnet(layout: V6SubnetLayout, addr: int) -> tuple[int, int]:
    if addr >> 64 != layout.network >> 64:
        raise NotOursError(f"{ipaddress.IPv6Address(addr)} is outside the configured /64")
    subnet = (addr >> 32) & 0xFFFFFFFF
    overflow = subnet & ((1 << layout.pad_width) - 1)
    return subnet >> 30, (overflow << 32) | (addr & 0xFFFFFFFF)


def restore_v6_subnet(layout: V6SubnetLayout, host: int) -> int:
    """Rebuild the original address from decrypted host bits."""
    return layout.reserved_net | (host & 0xFFFFFFFF)
