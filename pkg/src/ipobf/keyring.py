"""Versioned key sets and the three-slot rotation window.

Versions are two bits wide and cycle 0, 1, 2, 3, 0, ... while only the three
most recent key sets are retained, so a version number carried in a packet
never refers to two live key sets at once.  Windows are immutable; rotating
returns a new window and :class:`KeyManager` publishes it with a single
attribute store, which readers pick up without locking.
"""
from __future__ import annotations

import hashlib
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

__all__ = [
    "KeyGenerationError",
    "ExpiredKeyError",
    "KeySet",
    "RotationWindow",
    "KeyManager",
    "generate_keyset",
    "new_window",
    "rotate",
    "lookup",
    "otp_for",
    "export_keys",
    "VERSION_BITS",
    "RETAINED_SETS",
    "DEFAULT_PERIOD",
]

VERSION_BITS = 2
RETAINED_SETS = 3
DEFAULT_PERIOD = 5.0
OTP_ENTRIES = 1 << 16


class Randomness(Protocol):
    def getrandbits(self, k: int) -> int: ...

    def randbytes(self, n: int) -> bytes: ...


class KeyGenerationError(RuntimeError):
    """The entropy source failed while drawing key material."""


class ExpiredKeyError(LookupError):
    """The requested version is not (or no longer) retained."""

    def __init__(self, version: int):
        super().__init__(f"key set version {version} is not retained")
        self.version = version


@dataclass(frozen=True, eq=False)
class KeySet:
    version: int
    n: int
    k0: int
    k1: int
    k2: int
    otp_table: np.ndarray = field(repr=False)
    created_at: float = 0.0

    @property
    def keys(self) -> tuple[int, int, int]:
        return (self.k0, self.k1, self.k2)

    def otp_digest(self) -> str:
        return hashlib.sha256(self.otp_table.astype(">u2").tobytes()).hexdigest()


def generate_keyset(
    randomness: Randomness,
    n: int,
    version: int,
    clock: Callable[[], float] = time.monotonic,
) -> KeySet:
    """Draw three independent n-bit keys and a fresh one-time-pad table."""
    if not 0 <= version < (1 << VERSION_BITS):
        raise ValueError(f"version must fit in {VERSION_BITS} bits, got {version}")
    if not (8 <= n <= 64 and n % 8 == 0):
        raise ValueError(f"unsupported block width {n}")
    try:
        k0 = randomness.getrandbits(n)
        k1 = randomness.getrandbits(n)
        k2 = randomness.getrandbits(n)
        raw = randomness.randbytes(2 * OTP_ENTRIES)
    except Exception as exc:
        raise KeyGenerationError(f"entropy source failed: {exc}") from exc
    if len(raw) != 2 * OTP_ENTRIES:
        raise KeyGenerationError("entropy source returned a short read")
    table = np.frombuffer(raw, dtype=">u2").astype(np.uint16)
    table.setflags(write=False)
    return KeySet(version, n, k0, k1, k2, table, clock())


def otp_for(keyset: KeySet, pad_prefix: int) -> int:
    return int(keyset.otp_table[pad_prefix & 0xFFFF])


@dataclass(frozen=True)
class RotationWindow:
    """Up to three retained key sets, oldest first; the last one is current."""

    slots: tuple[KeySet, ...]
    period: float = DEFAULT_PERIOD

    def __post_init__(self):
        if not 1 <= len(self.slots) <= RETAINED_SETS:
            raise ValueError("a window retains between one and three key sets")

    @property
    def current(self) -> KeySet:
        return self.slots[-1]

    @property
    def current_version(self) -> int:
        return self.slots[-1].version

    @property
    def versions(self) -> tuple[int, ...]:
        return tuple(ks.version for ks in self.slots)


def new_window(
    randomness: Randomness,
    n: int,
    period: float = DEFAULT_PERIOD,
    version: int = 0,
    clock: Callable[[], float] = time.monotonic,
) -> RotationWindow:
    return RotationWindow((generate_keyset(randomness, n, version, clock),), period)


def rotate(
    window: RotationWindow,
    randomness: Randomness,
    clock: Callable[[], float] = time.monotonic,
) -> RotationWindow:
    """Issue the next version and evict anything beyond the newest three.

    On entropy failure the exception propagates and ``window`` is untouched,
    which is automatic since windows are never mutated.
    """
    version = (window.current_version + 1) % (1 << VERSION_BITS)
    fresh = generate_keyset(randomness, window.current.n, version, clock)
    slots = (window.slots + (fresh,))[-RETAINED_SETS:]
    return RotationWindow(slots, window.period)


def lookup(window: RotationWindow, version: int) -> KeySet:
    for ks in window.slots:
        if ks.version == version:
            return ks
    raise ExpiredKeyError(version)


def export_keys(window: RotationWindow) -> list[str]:
    """One line per retained version, for reproducing test runs."""
    width = (window.current.n + 3) // 4
    return [
        f"version={ks.version} k0={ks.k0:0{width}x} k1={ks.k1:0{width}x} "
        f"k2={ks.k2:0{width}x} otp_sha={ks.otp_digest()}"
        for ks in window.slots
    ]


class KeyManager:
    """Single writer, many readers.

    Readers call :meth:`snapshot` and keep using the returned window for the
    whole packet; rotations swap in a new window object atomically.
    """

    def __init__(
        self,
        n: int,
        randomness: Randomness | None = None,
        period: float = DEFAULT_PERIOD,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.randomness = randomness if randomness is not None else random.SystemRandom()
        self.clock = clock
        self._write_lock = threading.Lock()
        self._window = new_window(self.randomness, n, period, clock=clock)
        self.rotations = 0

    def snapshot(self) -> RotationWindow:
        return self._window

    def rotate(self) -> RotationWindow:
        with self._write_lock:
            window = rotate(self._window, self.randomness, self.clock)
            self._window = window
            self.rotations += 1
            return window

    def maybe_rotate(self, now: float | None = None) -> bool:
        """Rotate if the current set is older than the window period."""
        now = self.clock() if now is None else now
        if now - self._window.current.created_at >= self._window.period:
            self.rotate()
            return True
        return False
