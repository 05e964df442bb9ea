import json
import random
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from ipobf.analysis import (
    DomainError,
    avalanche_report,
    data_complexity,
    exhaustive_oracle,
    expected_collisions,
    figure6_csv,
    figure6_series,
    memory_for_data,
    poisson_interval,
    rate_limited_memory,
    report_json,
    security_bound,
    unlinkability_report,
)
from ipobf.cipher import CipherParams

from conftest import client_packet, make_setup


# -- bounds -----------------------------------------------------------------

def test_security_bounds():
    assert security_bound(32) == 2_642_245
    assert security_bound(64) == 6_981_463_658_331
    assert abs(security_bound(32) / 2.6e6 - 1) < 0.02
    assert abs(security_bound(64) / 7.0e12 - 1) < 0.01


@pytest.mark.parametrize("n", [1, 2, 3, 9, 33, 63, 64, 100])
def test_security_bound_is_floor(n):
    b = security_bound(n)
    assert b ** 3 <= 4 ** n < (b + 1) ** 3


def test_security_bound_domain():
    with pytest.raises(DomainError):
        security_bound(0)


def test_figure6_endpoints_and_slope():
    series = figure6_series(32)
    assert len(series) == 32
    assert (series[0].mem_log2, series[0].data_log2) == (1, 59)
    assert (series[-1].mem_log2, series[-1].data_log2) == (32, 28)
    for a, b in zip(series, series[1:]):
        assert (b.data_log2 - a.data_log2) / (b.mem_log2 - a.mem_log2) == -1
    for n in (40, 48, 56, 64):
        pts = figure6_series(n)
        assert pts[0].data_log2 == 2 * n - 5
        assert all(isinstance(p.data_log2, Fraction) for p in pts)


def test_figure6_domain():
    with pytest.raises(DomainError):
        figure6_series(36)
    with pytest.raises(DomainError):
        data_complexity(32, 0)
    with pytest.raises(DomainError):
        data_complexity(32, 33)
    assert data_complexity(32, Fraction(3, 2)) == Fraction(117, 2)


def test_trade_off_inverse():
    for m in range(1, 65):
        assert memory_for_data(64, data_complexity(64, m)) == m


def test_rate_limited_point_at_64():
    point = rate_limited_memory(64)
    assert point["data_log2"] == 40
    assert point["memory_blocks_log2"] == 84
    assert point["memory_bits_log2"] == 90
    assert abs(point["memory_bits_log2"] - 89) <= 1  # within a factor of two


def test_figure6_csv():
    text = figure6_csv()
    lines = text.strip().splitlines()
    assert lines[0] == "n,mem_log2,data_log2"
    assert len(lines) == 1 + 32 + 40 + 48 + 56 + 64
    assert "32,1,59" in lines and "64,64,60" in lines


def test_collision_helpers():
    assert expected_collisions(10_000, 24) == pytest.approx(2.98, abs=0.01)
    assert poisson_interval(2.98) == (0, 10)
    lo, hi = poisson_interval(100.0, 0.95)
    assert lo < 100 < hi


# -- batteries --------------------------------------------------------------

def test_avalanche_identity_is_exactly_one():
    report = avalanche_report(CipherParams.identity(32), 5000, seed=0)
    m = report["metrics"]
    assert m["mean"] == 1.0 and m["stdev"] == 0.0
    assert all(v == 1.0 for v in m["per_bit_mean"])


def test_avalanche_is_seed_deterministic(params56):
    a = avalanche_report(params56, 40_000, seed=5)
    b = avalanche_report(params56, 40_000, seed=5)
    c = avalanche_report(params56, 40_000, seed=6)
    assert report_json(a) == report_json(b)
    assert a["metrics"]["mean"] != c["metrics"]["mean"]
    assert len(a["metrics"]["per_bit_mean"]) == 56


def test_avalanche_input_validation(params56):
    with pytest.raises(DomainError):
        avalanche_report(params56, 0)


def _oracle_params(seed):
    return CipherParams.generate(16, random.Random(seed))


def test_exhaustive_oracle_passes():
    params = _oracle_params(1)
    report = exhaustive_oracle(params, (0x1234, 0xABCD, 0x0F0F))
    assert report and report.checked == 1 << 16 and not report.failures


def test_exhaustive_oracle_identity():
    assert exhaustive_oracle(CipherParams.identity(16), (0, 0, 0))


def test_exhaustive_oracle_catches_broken_inverse():
    params = _oracle_params(2)
    inv = bytearray(params.p2.inv_sbox)
    inv[0x10], inv[0x20] = inv[0x20], inv[0x10]
    broken = replace(params, p2=replace(params.p2, inv_sbox=bytes(inv)))
    report = exhaustive_oracle(broken, (1, 2, 3))
    assert not report
    assert report.failures[0]["check"] == "inverse"
    assert isinstance(report.failures[0]["input"], int)


def test_exhaustive_oracle_catches_corrupt_table():
    params = _oracle_params(3)
    table = params.p1.fused_fwd.copy()
    table[1, 0x42] ^= np.uint64(1)
    broken = replace(params, p1=replace(params.p1, fused_fwd=table))
    report = exhaustive_oracle(broken, (0, 0, 0))
    checks = [f["check"] for f in report.failures]
    assert checks[0] == "fused-vs-naive"
    assert "bijective" in checks
    assert report.failures[0]["input"] & 0xFF == 0x42


def test_exhaustive_oracle_rejects_wide_params(params56):
    with pytest.raises(DomainError):
        exhaustive_oracle(params56, (0, 0, 0))


def test_unlinkability_report_counts():
    pipeline, keys, rng = make_setup(64)
    report = unlinkability_report(pipeline, keys.snapshot(), client_packet(pipeline), 2000, rng, seed=7)
    assert report["metrics"] == {"distinct": 2000, "collisions": 0}
    assert report["params"]["l"] == 32
    doc = json.loads(report_json(report))
    assert doc["battery"] == "unlinkability" and doc["seed"] == 7


def test_unlinkability_report_needs_forwarding():
    pipeline, keys, rng = make_setup(unmapped_dst_policy="drop")
    pkt = replace(client_packet(pipeline), dst=0x01020304)
    with pytest.raises(DomainError):
        unlinkability_report(pipeline, keys.snapshot(), pkt, 1, rng)


def test_report_json_handles_fractions():
    doc = json.loads(report_json({"x": Fraction(3, 2), "y": Fraction(4), "pts": figure6_series(32)[:1]}))
    assert doc == {"x": 1.5, "y": 4, "pts": [{"n": 32, "mem_log2": 1, "data_log2": 59}]}
