"""Two-round Even-Mansour cipher over small blocks.

Each public permutation is a single substitution-permutation round: every
byte of the input goes through an 8-bit S-box, then a straight P-box moves
the bits around.  Two evaluation paths are kept side by side:

* the *naive* path substitutes bytes and then moves bits one at a time; it
  is slow and exists as the reference the tests check against;
* the *fused* path precomputes, per input byte lane, a 256-entry table of
  n-bit words so that one forward round is ``n/8`` lookups XORed together.

Words are big-endian: byte lane 0 is the most significant byte.  P-box
entries are destination-indexed with bit 0 the least significant bit, i.e.
``pbox[i]`` is where source bit ``i`` lands.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "AES_SBOX",
    "IDENTITY_SBOX",
    "PermutationError",
    "SpnPermutation",
    "CipherParams",
    "build_permutation",
    "random_pbox",
    "spn_forward",
    "spn_inverse",
    "spn_forward_naive",
    "spn_inverse_naive",
    "spn_forward_many",
    "spn_inverse_many",
    "encrypt",
    "decrypt",
    "encrypt_naive",
    "decrypt_naive",
    "encrypt_many",
    "decrypt_many",
    "dump_permutation",
    "load_permutation",
]

AES_SBOX = bytes.fromhex(
    "637c777bf26b6fc53001672bfed7ab76ca82c97dfa5947f0add4a2af9ca472c0"
    "b7fd9326363ff7cc34a5e5f171d8311504c723c31896059a071280e2eb27b275"
    "09832c1a1b6e5aa0523bd6b329e32f8453d100ed20fcb15b6acbbe394a4c58cf"
    "d0efaafb434d338545f9027f503c9fa851a3408f929d38f5bcb6da2110fff3d2"
    "cd0c13ec5f974417c4a77e3d645d197360814fdc222a908846eeb814de5e0bdb"
    "e0323a0a4906245cc2d3ac629195e479e7c8376d8dd54ea96c56f4ea657aae08"
    "ba78252e1ca6b4c6e8dd741f4bbd8b8a703eb5664803f60e613557b986c11d9e"
    "e1f8981169d98e949b1e87e9ce5528df8ca1890dbfe6426841992d0fb054bb16"
)

IDENTITY_SBOX = bytes(range(256))

SUPPORTED_WIDTHS = (8, 16, 24, 32, 40, 48, 56, 64)


class PermutationError(ValueError):
    """Raised when S-box or P-box material does not describe a bijection."""


def _check_width(n: int) -> None:
    if n not in SUPPORTED_WIDTHS:
        raise PermutationError(f"block width must be a multiple of 8 in [8, 64], got {n}")


def _permute_bits(x: int, pbox: Sequence[int]) -> int:
    y = 0
    for src, dst in enumerate(pbox):
        if (x >> src) & 1:
            y |= 1 << dst
    return y


@dataclass(frozen=True, eq=False)
class SpnPermutation:
    """One substitution-permutation round with its inverse and lookup tables.

    Build instances with :func:`build_permutation`; the derived fields are
    filled in there and never change afterwards.
    """

    n: int
    sbox: bytes
    pbox: tuple[int, ...]
    inv_sbox: bytes
    inv_pbox: tuple[int, ...]
    # (n/8, 256) uint64; XOR of one row entry per input byte = forward output
    fused_fwd: np.ndarray = field(repr=False)
    # (n/8, 256) uint64; XOR of one row entry per input byte = inverse P-box
    # output, which is then run through the inverse S-box byte by byte
    fused_inv: np.ndarray = field(repr=False)
    _fwd_rows: tuple[tuple[int, ...], ...] = field(repr=False)
    _inv_rows: tuple[tuple[int, ...], ...] = field(repr=False)
    _inv_sbox_arr: np.ndarray = field(repr=False)

    @property
    def lanes(self) -> int:
        return self.n // 8

    @property
    def table_bytes(self) -> int:
        """Memory taken by the forward tables (the inverse tables match)."""
        return self.fused_fwd.nbytes

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SpnPermutation):
            return NotImplemented
        return (self.n, self.sbox, self.pbox) == (other.n, other.sbox, other.pbox)

    def __hash__(self) -> int:
        return hash((self.n, self.sbox, self.pbox))


def build_permutation(sbox: Sequence[int] | bytes, pbox: Sequence[int]) -> SpnPermutation:
    """Validate S-box/P-box material and derive inverses and fused tables."""
    sbox = bytes(sbox)
    pbox = tuple(int(p) for p in pbox)
    n = len(pbox)
    _check_width(n)
    if len(sbox) != 256:
        raise PermutationError(f"S-box must have 256 entries, got {len(sbox)}")
    if len(set(sbox)) != 256:
        raise PermutationError("S-box is not a bijection on bytes")
    if sorted(pbox) != list(range(n)):
        bad = [p for p in pbox if not 0 <= p < n]
        if bad:
            raise PermutationError(f"P-box position {bad[0]} out of range for n={n}")
        raise PermutationError("P-box contains duplicate positions")

    inv = bytearray(256)
    for b, s in enumerate(sbox):
        inv[s] = b
    inv_sbox = bytes(inv)
    inv_pbox_list = [0] * n
    for src, dst in enumerate(pbox):
        inv_pbox_list[dst] = src
    inv_pbox = tuple(inv_pbox_list)

    lanes = n // 8
    fwd = np.zeros((lanes, 256), dtype=np.uint64)
    bwd = np.zeros((lanes, 256), dtype=np.uint64)
    for i in range(lanes):
        shift = n - 8 * (i + 1)
        for b in range(256):
            fwd[i, b] = _permute_bits(sbox[b] << shift, pbox)
            bwd[i, b] = _permute_bits(b << shift, inv_pbox)
    fwd.setflags(write=False)
    bwd.setflags(write=False)
    inv_arr = np.frombuffer(inv_sbox, dtype=np.uint8).astype(np.uint64)
    inv_arr.setflags(write=False)

    return SpnPermutation(
        n=n,
        sbox=sbox,
        pbox=pbox,
        inv_sbox=inv_sbox,
        inv_pbox=inv_pbox,
        fused_fwd=fwd,
        fused_inv=bwd,
        _fwd_rows=tuple(tuple(int(v) for v in row) for row in fwd),
        _inv_rows=tuple(tuple(int(v) for v in row) for row in bwd),
        _inv_sbox_arr=inv_arr,
    )


def random_pbox(n: int, rng: random.Random) -> list[int]:
    _check_width(n)
    pbox = list(range(n))
    rng.shuffle(pbox)
    return pbox


# -- scalar paths -----------------------------------------------------------

def spn_forward(x: int, perm: SpnPermutation) -> int:
    shift = perm.n - 8
    y = 0
    for row in perm._fwd_rows:
        y ^= row[(x >> shift) & 0xFF]
        shift -= 8
    return y


def spn_inverse(y: int, perm: SpnPermutation) -> int:
    shift = perm.n - 8
    z = 0
    for row in perm._inv_rows:
        z ^= row[(y >> shift) & 0xFF]
        shift -= 8
    inv = perm.inv_sbox
    x = 0
    for shift in range(perm.n - 8, -1, -8):
        x |= inv[(z >> shift) & 0xFF] << shift
    return x


def spn_forward_naive(x: int, perm: SpnPermutation) -> int:
    """Byte substitution followed by a bit-by-bit P-box; the reference path."""
    n = perm.n
    raw = x.to_bytes(n // 8, "big")
    sub = int.from_bytes(bytes(perm.sbox[b] for b in raw), "big")
    return _permute_bits(sub, perm.pbox)


def spn_inverse_naive(y: int, perm: SpnPermutation) -> int:
    n = perm.n
    unmoved = _permute_bits(y, perm.inv_pbox)
    raw = unmoved.to_bytes(n // 8, "big")
    return int.from_bytes(bytes(perm.inv_sbox[b] for b in raw), "big")


# -- vectorised paths -------------------------------------------------------

def _as_words(xs) -> np.ndarray:
    return np.asarray(xs, dtype=np.uint64)


def spn_forward_many(xs, perm: SpnPermutation) -> np.ndarray:
    xs = _as_words(xs)
    out = np.zeros_like(xs)
    for i in range(perm.lanes):
        shift = np.uint64(perm.n - 8 * (i + 1))
        out ^= perm.fused_fwd[i][(xs >> shift) & np.uint64(0xFF)]
    return out


def spn_inverse_many(ys, perm: SpnPermutation) -> np.ndarray:
    ys = _as_words(ys)
    z = np.zeros_like(ys)
    for i in range(perm.lanes):
        shift = np.uint64(perm.n - 8 * (i + 1))
        z ^= perm.fused_inv[i][(ys >> shift) & np.uint64(0xFF)]
    out = np.zeros_like(ys)
    for i in range(perm.lanes):
        shift = np.uint64(perm.n - 8 * (i + 1))
        out |= perm._inv_sbox_arr[(z >> shift) & np.uint64(0xFF)] << shift
    return out


# -- the cipher -------------------------------------------------------------

@dataclass(frozen=True)
class CipherParams:
    """Block width plus the two public permutations of the cipher."""

    n: int
    p1: SpnPermutation
    p2: SpnPermutation

    def __post_init__(self):
        _check_width(self.n)
        if self.p1.n != self.n or self.p2.n != self.n:
            raise PermutationError("permutation widths do not match the block width")

    @property
    def l(self) -> int:
        """Random padding width appended to a 32-bit address."""
        return self.n - 32

    @property
    def mask(self) -> int:
        return (1 << self.n) - 1

    @classmethod
    def generate(cls, n: int, rng: random.Random, sbox: bytes = AES_SBOX) -> "CipherParams":
        """Shared S-box, independently shuffled P-boxes for the two rounds."""
        p1 = build_permutation(sbox, random_pbox(n, rng))
        p2 = build_permutation(sbox, random_pbox(n, rng))
        return cls(n, p1, p2)

    @classmethod
    def identity(cls, n: int) -> "CipherParams":
        perm = build_permutation(IDENTITY_SBOX, range(n))
        return cls(n, perm, perm)


def encrypt(m: int, keys: Sequence[int], params: CipherParams) -> int:
    k0, k1, k2 = keys
    return spn_forward(spn_forward(m ^ k0, params.p1) ^ k1, params.p2) ^ k2


def decrypt(c: int, keys: Sequence[int], params: CipherParams) -> int:
    k0, k1, k2 = keys
    return spn_inverse(spn_inverse(c ^ k2, params.p2) ^ k1, params.p1) ^ k0


def encrypt_naive(m: int, keys: Sequence[int], params: CipherParams) -> int:
    k0, k1, k2 = keys
    return spn_forward_naive(spn_forward_naive(m ^ k0, params.p1) ^ k1, params.p2) ^ k2


def decrypt_naive(c: int, keys: Sequence[int], params: CipherParams) -> int:
    k0, k1, k2 = keys
    return spn_inverse_naive(spn_inverse_naive(c ^ k2, params.p2) ^ k1, params.p1) ^ k0


def encrypt_many(ms, keys, params: CipherParams) -> np.ndarray:
    """Vectorised :func:`encrypt`; each key may be a scalar or an array."""
    k0, k1, k2 = (_as_words(k) for k in keys)
    ms = _as_words(ms)
    return spn_forward_many(spn_forward_many(ms ^ k0, params.p1) ^ k1, params.p2) ^ k2


def decrypt_many(cs, keys, params: CipherParams) -> np.ndarray:
    k0, k1, k2 = (_as_words(k) for k in keys)
    cs = _as_words(cs)
    return spn_inverse_many(spn_inverse_many(cs ^ k2, params.p2) ^ k1, params.p1) ^ k0


# -- plain-text form --------------------------------------------------------

def dump_permutation(perm: SpnPermutation) -> str:
    return f"sbox: {perm.sbox.hex()}\npbox: {' '.join(map(str, perm.pbox))}\n"


def load_permutation(text: str) -> SpnPermutation:
    fields = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise PermutationError(f"malformed permutation line: {line!r}")
        fields[key.strip()] = value.strip()
    try:
        sbox = bytes.fromhex(fields["sbox"])
        pbox = [int(p) for p in fields["pbox"].split()]
    except KeyError as exc:
        raise PermutationError(f"missing {exc.args[0]!r} line") from None
    except ValueError as exc:
        raise PermutationError(str(exc)) from None
    return build_permutation(sbox, pbox)
