from fractions import Fraction

import pytest

from rsop_lab.comb_bound import (
    comb_bound_value,
    exact_two_value_expectation,
    outcomes,
    rows_to_csv,
    verify_comb,
)
from rsop_lab.core import Partition, TiePolicy, make_two_value, rsop_revenue, rsop_star_revenue
from rsop_lab.oracle import exact_expected_revenue


def _multiset_oracle(k, h, variant, tie="lowest_price"):
    v = make_two_value(k, h)
    n = v.n
    f = rsop_star_revenue if variant == "rsop_star" else rsop_revenue
    total = sum(Fraction(f(v, Partition.from_mask(n, m), tie).total).limit_denominator(10**6)
                for m in range(1 << n))
    return total / 2**n


def test_weights_sum_to_one():
    for k, h in [(1, 2), (3, 4), (2, 6)]:
        assert sum(o.weight for o in outcomes(k, h)) == 1


def test_examples():
    assert exact_two_value_expectation(1, 2, "rsop") == Fraction(1, 2)
    assert exact_two_value_expectation(1, 2, "rsop_star") == Fraction(3, 2)
    for h in range(2, 9):
        assert exact_two_value_expectation(1, h, "rsop_star") == 1 + Fraction(h - 1, 2)
    assert comb_bound_value(1, 2) == Fraction(1, 2)
    assert comb_bound_value(2, 2) == Fraction(5, 2)
    with pytest.raises(ValueError):
        exact_two_value_expectation(1, 1)
    with pytest.raises(ValueError):
        exact_two_value_expectation(1, 2, "vcg")


def test_closed_form_ratio_limit():
    k, h = 12, 3
    assert abs(comb_bound_value(k, h) / (k * h) - (Fraction(1, 2) + Fraction(1, 6))) < Fraction(1, 10**9)


@pytest.mark.parametrize("k,h", [(1, 2), (1, 5), (2, 2), (2, 3), (3, 2), (2, 4)])
def test_counts_match_multiset_enumeration(k, h):
    for variant in ("rsop", "rsop_star"):
        assert exact_two_value_expectation(k, h, variant) == _multiset_oracle(k, h, variant)


@pytest.mark.parametrize("k,h", [(4, 4), (2, 8), (8, 2), (5, 3)])
def test_counts_match_fast_enumeration(k, h):
    v = make_two_value(k, h)
    for variant in ("rsop", "rsop_star"):
        got = exact_two_value_expectation(k, h, variant)
        assert float(got) == pytest.approx(exact_expected_revenue(v, variant).value, abs=1e-12)


@pytest.mark.parametrize("k,h", [(1, 3), (2, 3), (3, 4), (5, 2)])
def test_tie_invariance(k, h):
    vals = {exact_two_value_expectation(k, h, "rsop", t) for t in TiePolicy}
    assert len(vals) == 1


def test_verify_grid():
    rows = verify_comb(6, 6)
    assert len(rows) == 6 * 5
    assert all(r.ok for r in rows)
    first = next(r for r in rows if (r.k, r.h) == (1, 2))
    assert first.slack == 0 and first.exact_rsop == Fraction(1, 2)
    for r in rows:
        assert r.exact_rsop_star - r.exact_rsop == Fraction(r.k * r.h, 2 ** (r.k * r.h - 1))


def test_ratio_non_decreasing_in_k():
    table = {(r.k, r.h): r.exact_rsop / (r.k * r.h) for r in verify_comb(6, 6)}
    for (k, h), v in table.items():
        if (k + 1, h) in table:
            assert table[(k + 1, h)] >= v


def test_ratio_is_not_monotone_in_h():
    # one high bid gains with h; from k = 3 on the ratio falls with h
    table = {(r.k, r.h): r.exact_rsop / (r.k * r.h) for r in verify_comb(6, 6)}
    assert all(table[(1, h + 1)] > table[(1, h)] for h in range(2, 6))
    assert all(table[(k, h + 1)] < table[(k, h)] for k in range(3, 7) for h in range(2, 6))


def test_csv():
    text = rows_to_csv(verify_comb(1, 2), {"k_max": 1, "h_max": 2}).splitlines()
    assert text[0] == "# k_max=1 h_max=2"
    assert text[1].startswith("k,h,exact_rsop,exact_rsop_star,bound,slack")
    assert text[2] == "1,2,0.500000,1.500000,0.500000,0.000000,1"
