import json
from fractions import Fraction

import numpy as np
import pytest

from rsop_lab.core import make_equal_revenue
from rsop_lab.oracle import exact_expected_revenue
from rsop_lab.upper_bound import (
    certificate_json,
    farey_ratios,
    mc_check,
    monotonicity_audit,
    rsop_expectation_equal_revenue,
    rsop_star_expectation_equal_revenue,
    side_max_cdf,
    upper_bound_certificate,
)


def test_farey_ratios():
    p, q = farey_ratios(4)
    got = [Fraction(int(a), int(b)) for a, b in zip(p, q)]
    assert got == sorted({Fraction(k, j) for j in range(1, 5) for k in range(j + 1)})


def test_side_max_cdf_single_bid():
    c = side_max_cdf(1, "A", "free")
    lookup = dict(zip(c.thresholds, c.cdf))
    assert lookup[Fraction(0)] == 0.5
    assert lookup[Fraction(1)] == 1.0


def test_side_max_cdf_two_bids_at_half():
    # A in {}, {2} meet max <= 1/2; {1} and {1,2} put ratio 1 at index 1
    c = side_max_cdf(2, "A", "free")
    lookup = dict(zip(c.thresholds, c.cdf))
    assert lookup[Fraction(1, 2)] == 0.5


@pytest.mark.parametrize("n", [1, 5, 17])
@pytest.mark.parametrize("side", ["A", "B"])
def test_side_max_cdf_shape(n, side):
    c = side_max_cdf(n, side, "free")
    assert c.cdf[-1] == pytest.approx(1.0, abs=1e-15)
    assert np.all(np.diff(c.cdf) >= -1e-15)


def test_side_max_cdf_against_enumeration():
    n = 10
    for side in ("A", "B"):
        c = side_max_cdf(n, side, "free")
        lookup = dict(zip(c.thresholds, c.cdf))
        for t in (Fraction(1, 3), Fraction(1, 2), Fraction(3, 5), Fraction(5, 7)):
            hits = 0
            for mask in range(1 << n):
                s, ok = 0, True
                for j in range(1, n + 1):
                    in_a = bool(mask >> (j - 1) & 1)
                    s += in_a
                    mine = s if side == "A" else j - s
                    if in_a == (side == "A") and mine * t.denominator > j * t.numerator:
                        ok = False
                hits += ok
            assert lookup[t] == pytest.approx(hits / 2**n, abs=1e-15)


@pytest.mark.parametrize("n", [1, 2, 3, 8, 14, 22])
def test_star_matches_oracle(n):
    v = make_equal_revenue(n)
    oracle = exact_expected_revenue(v, "rsop_star", convention="first_in_B").value
    assert rsop_star_expectation_equal_revenue(n) == pytest.approx(oracle, abs=1e-12)
    assert rsop_star_expectation_equal_revenue(n, "free") == pytest.approx(oracle, abs=1e-12)


def test_star_single_bid_is_one():
    assert rsop_star_expectation_equal_revenue(1) == pytest.approx(1.0)


@pytest.mark.parametrize("n", [2, 9, 20])
def test_rsop_matches_oracle(n):
    v = make_equal_revenue(n)
    oracle = exact_expected_revenue(v, "rsop", convention="first_in_B").value
    assert rsop_expectation_equal_revenue(n) == pytest.approx(oracle, abs=1e-12)


def test_workers_keep_bits():
    assert (rsop_star_expectation_equal_revenue(60, workers=1)
            == rsop_star_expectation_equal_revenue(60, workers=4))


def test_monotonicity_audit():
    rows = monotonicity_audit(30)
    assert not any(r["violation"] for r in rows)
    assert rows[0]["value"] == pytest.approx(1.0)
    assert max(r["value"] for r in rows) == rows[0]["value"]
    with pytest.raises(ValueError):
        monotonicity_audit(1)


def test_certificate_small_forced_n():
    cert = upper_bound_certificate(2, n=2)
    assert cert["rsop"] == pytest.approx(0.25)
    assert cert["ratio"] == pytest.approx(4.0)
    assert "caveat" in cert
    data = json.loads(certificate_json(cert))
    assert data["n"] == 2


def test_certificate_picks_n(monkeypatch):
    import rsop_lab.upper_bound as ub
    seen = []
    monkeypatch.setattr(ub, "rsop_expectation_equal_revenue", lambda n, workers=1: seen.append(n) or 0.3)
    assert ub.upper_bound_certificate(2)["n"] == 400
    assert ub.upper_bound_certificate(500)["n"] == 500
    assert seen == [400, 500]
    monkeypatch.undo()
    cert = upper_bound_certificate(3, n=50)
    assert cert["certified"] == (cert["ratio"] > 2.65)


def test_mc_check_agrees():
    r = mc_check(12, samples=200_000, seed=5)
    assert r["agrees"]
    assert r["samples"] == 200_000
