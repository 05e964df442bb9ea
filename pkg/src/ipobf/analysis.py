"""Security-bound arithmetic and statistical test batteries.

Exponent arithmetic is exact (ints/Fractions).  Batteries draw per-chunk
generators keyed by ``(seed, chunk)`` so a run splits across workers
without changing its result.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from .cipher import (
    CipherParams,
    decrypt,
    encrypt_many,
    encrypt_naive,
)

__all__ = [
    "DomainError",
    "ComplexityPoint",
    "OracleReport",
    "security_bound",
    "data_complexity",
    "memory_for_data",
    "rate_limited_memory",
    "figure6_series",
    "figure6_csv",
    "avalanche_report",
    "unlinkability_report",
    "exhaustive_oracle",
    "expected_collisions",
    "poisson_interval",
    "report_json",
]

FIGURE6_WIDTHS = (32, 40, 48, 56, 64)
CHUNK = 1 << 14


class DomainError(ValueError):
    pass


def _icbrt(x: int) -> int:
    """Floor of the cube root of a non-negative integer."""
    if x < 2:
        return x
    r = 1 << ((x.bit_length() + 2) // 3)
    while True:
        s = (2 * r + x // (r * r)) // 3
        if s >= r:
            break
        r = s
    while r ** 3 > x:
        r -= 1
    while (r + 1) ** 3 <= x:
        r += 1
    return r


def security_bound(n: int) -> int:
    """floor(2 ** (2n/3)), the proven query bound for the two-round cipher."""
    if n < 1:
        raise DomainError("block width must be positive")
    return _icbrt(1 << (2 * n))


# -- memory/data trade-off --------------------------------------------------

@dataclass(frozen=True)
class ComplexityPoint:
    n: int
    mem_log2: Fraction  # n-bit blocks
    data_log2: Fraction  # plaintext/ciphertext pairs


def data_complexity(n: int, mem_blocks_log2) -> Fraction:
    """log2 D for D = 2^(2(n-1)) / (4M), memory M counted in n-bit blocks."""
    mem = Fraction(mem_blocks_log2)
    if not 1 <= mem <= n:
        raise DomainError(f"memory exponent {mem} outside [1, {n}]")
    return Fraction(2 * (n - 1) - 2) - mem


def memory_for_data(n: int, data_log2) -> Fraction:
    """Inverse trade-off: block-memory exponent needed for a data budget."""
    return Fraction(2 * (n - 1) - 2) - Fraction(data_log2)


def rate_limited_memory(n: int, rate_log2=40, seconds_log2=0) -> dict:
    """Memory an adversary needs when data is capped by a packet rate.

    Data is ``2**rate_log2`` pairs per second over ``2**seconds_log2``
    seconds; 2**40 is the "one trillion packets per second" ceiling.
    Memory comes back in both units, n-bit blocks and bits.
    """
    data = Fraction(rate_log2) + Fraction(seconds_log2)
    blocks = memory_for_data(n, data)
    # block -> bit conversion is exact only for power-of-two widths
    width = Fraction(n.bit_length() - 1) if n & (n - 1) == 0 else Fraction(math.log2(n))
    return {
        "n": n,
        "data_log2": data,
        "memory_blocks_log2": blocks,
        "memory_bits_log2": blocks + width,
    }


def figure6_series(n: int) -> list[ComplexityPoint]:
    if n not in FIGURE6_WIDTHS:
        raise DomainError(f"series defined for n in {FIGURE6_WIDTHS}")
    return [ComplexityPoint(n, Fraction(m), data_complexity(n, m)) for m in range(1, n + 1)]


def figure6_csv(widths: Iterable[int] = FIGURE6_WIDTHS) -> str:
    rows = ["n,mem_log2,data_log2"]
    for n in widths:
        rows.extend(f"{p.n},{p.mem_log2},{p.data_log2}" for p in figure6_series(n))
    return "\n".join(rows) + "\n"


# -- statistics helpers -----------------------------------------------------

def expected_collisions(count: int, bits: int) -> float:
    """Expected colliding pairs among ``count`` uniform ``bits``-bit draws."""
    return count * (count - 1) / 2 / 2 ** bits


def poisson_interval(lam: float, coverage: float = 0.999) -> tuple[int, int]:
    """Central interval [lo, hi] holding at least ``coverage`` of Poisson(lam)."""
    tail = (1 - coverage) / 2
    pmf = math.exp(-lam)
    cdf = pmf
    k = 0
    lo = None
    while True:
        if lo is None and cdf > tail:
            lo = k
        if cdf >= 1 - tail:
            return lo, k
        k += 1
        pmf *= lam / k
        cdf += pmf


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng([seed, chunk])


def _words(rng: np.random.Generator, size: int, n: int) -> np.ndarray:
    return rng.bit_generator.random_raw(size) & np.uint64((1 << n) - 1)


# -- batteries --------------------------------------------------------------

def avalanche_report(params: CipherParams, trials: int, seed: int = 0) -> dict:
    """Ciphertext Hamming distance after flipping one plaintext bit.

    Each trial draws fresh keys and a fresh plaintext; trial ``i`` flips bit
    ``i mod n`` so every position gets the same share of trials.
    """
    if trials < 1:
        raise DomainError("need at least one trial")
    n = params.n
    per_bit_sum = np.zeros(n, dtype=np.int64)
    per_bit_cnt = np.zeros(n, dtype=np.int64)
    total = 0
    total_sq = 0
    for chunk, start in enumerate(range(0, trials, CHUNK)):
        size = min(CHUNK, trials - start)
        rng = _chunk_rng(seed, chunk)
        m = _words(rng, size, n)
        keys = [_words(rng, size, n) for _ in range(3)]
        positions = (np.arange(start, start + size) % n).astype(np.uint64)
        flipped = m ^ (np.uint64(1) << positions)
        dist = np.bitwise_count(encrypt_many(m, keys, params) ^ encrypt_many(flipped, keys, params))
        dist = dist.astype(np.int64)
        total += int(dist.sum())
        total_sq += int((dist * dist).sum())
        np.add.at(per_bit_sum, positions.astype(np.int64), dist)
        np.add.at(per_bit_cnt, positions.astype(np.int64), 1)
    mean = total / trials
    var = (total_sq - trials * mean * mean) / (trials - 1) if trials > 1 else 0.0
    stdev = math.sqrt(max(var, 0.0))
    stderr = stdev / math.sqrt(trials)
    expected = n / 2
    per_bit = [
        float(s / c) if c else None for s, c in zip(per_bit_sum.tolist(), per_bit_cnt.tolist())
    ]
    return {
        "battery": "avalanche",
        "params": {"n": n, "trials": trials},
        "seed": seed,
        "metrics": {
            "mean": mean,
            "stdev": stdev,
            "stderr": stderr,
            "expected": expected,
            "z": (mean - expected) / stderr if stderr else 0.0,
            "per_bit_mean": per_bit,
        },
    }


def unlinkability_report(pipeline, window, packet, count: int, rng, seed=None) -> dict:
    """Send ``packet`` ``count`` times and count distinct IPv6 sources."""
    from .pipeline import ForwardV6

    if count < 1:
        raise DomainError("need at least one packet")
    seen = set()
    for _ in range(count):
        action = pipeline.outbound(packet, window, rng)
        if not isinstance(action, ForwardV6):
            raise DomainError(f"packet was not forwarded: {action!r}")
        seen.add(action.packet.src)
    return {
        "battery": "unlinkability",
        "params": {"n": pipeline.params.n, "l": pipeline.cfg.layout.l, "count": count},
        "seed": seed,
        "metrics": {"distinct": len(seen), "collisions": count - len(seen)},
    }


@dataclass
class OracleReport:
    passed: bool
    checked: int
    failures: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.passed


def exhaustive_oracle(params: CipherParams, keys) -> OracleReport:
    """Check every 16-bit plaintext: fused == naive, bijective, invertible."""
    if params.n != 16:
        raise DomainError("the exhaustive oracle runs at n = 16")
    k0, k1, k2 = (int(k) for k in keys)
    keys = (k0, k1, k2)
    domain = np.arange(1 << 16, dtype=np.uint64)
    fused = encrypt_many(domain, keys, params).tolist()
    failures = []
    for m, c in enumerate(fused):
        ref = encrypt_naive(m, keys, params)
        if c != ref:
            failures.append({"check": "fused-vs-naive", "input": m, "fused": c, "naive": ref})
            break
    if len(set(fused)) != 1 << 16:
        seen = {}
        for m, c in enumerate(fused):
            if c in seen:
                failures.append({"check": "bijective", "input": m, "collides_with": seen[c]})
                break
            seen[c] = m
    for m, c in enumerate(fused):
        back = decrypt(c, keys, params)
        if back != m:
            failures.append({"check": "inverse", "input": m, "decrypted": back})
            break
    return OracleReport(not failures, 1 << 16, failures)


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return int(obj) if obj.denominator == 1 else float(obj)
    if isinstance(obj, ComplexityPoint):
        return {k: _jsonable(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def report_json(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True)
