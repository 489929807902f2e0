import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsop_lab.oracle import exact_event_probability, membership_matrix
from rsop_lab.prob_engine import (
    EventSpec,
    Threshold,
    conditional_expectation_table,
    conditional_max_expectation,
    conditional_max_parts,
    event_prob_table,
    rate_alpha,
    single_event_lower,
    single_event_upper,
    tail_probability_lower,
    terminal_tail_weights,
)


def _all_rows(n):
    return membership_matrix(n, 0, 1 << (n - 1), "first_in_B")


def test_threshold_is_exact():
    t = Threshold.of(0.51)
    assert t.fraction == Fraction(51, 100)
    assert t.admits(51, 100) and not t.admits(52, 100)
    assert Threshold(2, 4) == Threshold(1, 2)
    with pytest.raises(ValueError):
        Threshold(3, 2)


def test_rate_examples():
    assert rate_alpha(Fraction(1, 2)) == 1.0
    assert rate_alpha(1) == 0.5
    assert rate_alpha(Fraction(3, 4)) == pytest.approx(1 / (2 * 0.75**0.75 * 0.25**0.25))
    assert rate_alpha(Fraction(3, 4)) == pytest.approx(0.8774, abs=1e-4)


def test_single_event_lower_examples():
    assert single_event_lower(Fraction(1, 2), 2).value == 0.0
    b = single_event_lower(Fraction(3, 4), 8)
    assert b.value == pytest.approx(0.6489, abs=1e-4)
    assert b.value <= sum(math.comb(8, k) for k in range(7)) / 2**8
    assert single_event_lower(1, 5).value == 0.96875
    with pytest.raises(ValueError):
        single_event_lower(Fraction(2, 5), 3)


@pytest.mark.parametrize("alpha", [Fraction(1, 2), Fraction(3, 5), Fraction(3, 4), Fraction(9, 10)])
@pytest.mark.parametrize("j", [1, 4, 8, 13])
def test_single_event_lower_is_valid(alpha, j):
    # P[S_j <= alpha j] for unpinned fair bits
    exact = sum(math.comb(j, k) for k in range(j + 1) if k * alpha.denominator <= j * alpha.numerator) / 2**j
    assert single_event_lower(alpha, j).value <= exact + 1e-15


def test_single_event_upper_examples():
    big = single_event_upper(Fraction(12, 25), 5001)
    assert big.value == pytest.approx(0.019813, abs=1e-6)
    exact = sum(math.comb(10, k) for k in range(4)) / 2**10
    assert single_event_upper(Fraction(3, 10), 10).value >= exact
    with pytest.raises(ValueError):
        single_event_upper(Fraction(12, 25), 20)


def test_single_event_upper_decreases_in_j():
    vals = [single_event_upper(Fraction(12, 25), j).value for j in range(1000, 100_001, 3000)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("j", [30, 60, 120])
def test_single_event_upper_is_valid(j):
    alpha = Fraction(2, 5)
    exact = sum(math.comb(j, k) for k in range(j + 1) if 5 * k <= 2 * j) / 2**j
    assert single_event_upper(alpha, j).value >= exact


def test_tail_examples():
    t = tail_probability_lower(Fraction(51, 100), 5000, 100_000)
    # the true value is positive but below the smallest double
    assert t.value == 0.0 and -2100 < t.log_value < -2000
    r = rate_alpha(Fraction(4, 5))
    same = tail_probability_lower(Fraction(4, 5), 10, 10)
    assert same.value > 0
    assert same.value == pytest.approx(1 - r**11 / (1 - r))
    vals = [tail_probability_lower(Fraction(3, 5), ell, 2000).value for ell in (50, 100, 200, 400, 800)]
    assert all(a < b for a, b in zip(vals, vals[1:])) and vals[-1] > 0.9999
    assert tail_probability_lower(Fraction(1, 2), 5, 10).value == 0.0
    assert tail_probability_lower(1, 5, 10).value == 1.0


def test_tail_bound_below_truncated_truth():
    # P[E on ell+1..n] over the truncated world dominates the infinite-tail bound
    n = 18
    rows = _all_rows(n)
    for alpha in (Fraction(3, 5), Fraction(7, 10), Fraction(4, 5)):
        for ell in (4, 8):
            truth = EventSpec(alpha, ell + 1, n)(rows).mean()
            assert tail_probability_lower(alpha, ell, 1000).value <= truth


def test_event_table_examples():
    t = event_prob_table(Fraction(2, 5), 2)
    assert t.probs.tolist()[:2] == [0.5, 0.0] and t.probability == 0.5
    assert event_prob_table(Fraction(3, 5), 2).probability == 1.0
    one = event_prob_table(Fraction(3, 5), 1)
    assert one.probs.tolist() == [1.0, 0.0]


def test_event_table_rejects_bad_starts():
    with pytest.raises(ValueError):
        event_prob_table(Fraction(3, 5), 5, (3, 4))
    with pytest.raises(ValueError):
        event_prob_table(Fraction(3, 5), 2, (4, 1))


@pytest.mark.parametrize("alpha", [Fraction(51, 100), Fraction(2, 3), Fraction(4, 5), Fraction(1, 2)])
def test_event_table_matches_enumeration(alpha):
    n = 20
    t = event_prob_table(alpha, n)
    res = exact_event_probability(n, [EventSpec(alpha, 1, n)])
    assert t.probability == pytest.approx(res["joint"], abs=1e-12)
    rows = _all_rows(n)
    ok = EventSpec(alpha, 1, n)(rows)
    s = rows.sum(axis=1)
    for k in range(0, n + 1, 3):
        assert t.probs[k] == pytest.approx(np.mean(ok & (s == k)), abs=1e-12)


def test_generalised_start_matches_enumeration():
    n, d, a, alpha = 16, 4, 2, Fraction(3, 5)
    t = event_prob_table(alpha, n, (d, a))
    rows = _all_rows(n)
    cond = rows[:, :d].sum(axis=1) == a
    ok = EventSpec(alpha, d + 1, n)(rows)
    assert t.probability == pytest.approx(np.mean(ok[cond]), abs=1e-12)


def test_conditional_expectation_examples():
    assert conditional_expectation_table(Fraction(3, 5), 2, 2).expectation == 0.25
    assert conditional_expectation_table(Fraction(2, 5), 2, 2).expectation == 0.0
    with pytest.raises(ValueError):
        conditional_expectation_table(Fraction(3, 5), 4, 5)


@pytest.mark.parametrize("lam,ell,alpha", [(5, 15, Fraction(7, 10)), (2, 12, Fraction(3, 5)),
                                           (9, 18, Fraction(51, 100)), (18, 18, Fraction(4, 5))])
def test_conditional_expectation_matches_enumeration(lam, ell, alpha):
    rows = _all_rows(ell)
    ok = EventSpec(alpha, 1, ell)(rows)
    truth = np.mean(rows[:, :lam].sum(axis=1) / lam * ok)
    got = conditional_expectation_table(alpha, ell, lam).expectation
    assert got == pytest.approx(truth, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=2, max_value=14), st.integers(min_value=51, max_value=100))
def test_event_probability_monotone(ell, pct):
    a = Fraction(pct, 100)
    p = event_prob_table(a, ell).probability
    assert event_prob_table(a, ell + 1).probability <= p + 1e-15
    if pct < 100:
        assert event_prob_table(Fraction(pct + 1, 100), ell).probability >= p - 1e-15


def test_threshold_rationals_are_authoritative():
    a = Fraction(51, 100)
    base = event_prob_table(a, 200).probs
    for x in (math.nextafter(0.51, 1), math.nextafter(0.51, 0)):
        assert np.array_equal(event_prob_table(Threshold.of(x), 200).probs, base)


def test_conditional_max_examples():
    d, a, alpha, ell = 3, 1, Fraction(7, 10), 40
    # c' = 0 reduces to c times the certified event probability
    v = conditional_max_expectation(0.4, 0.0, 5, d, a, alpha, ell, 1000)
    p = conditional_max_expectation(1.0, 0.0, 5, d, a, alpha, ell, 1000)
    assert v == pytest.approx(0.4 * p)
    cert, exact = conditional_max_parts(1.0, 0.0, 5, d, a, alpha, ell, 1000)
    assert exact == pytest.approx(event_prob_table(alpha, ell, (d, a)).probability, abs=1e-12)
    assert cert <= exact
    # alpha = 1, one unconstrained step
    assert conditional_max_expectation(0.0, 0.3, d + 1, d, a, 1, ell, 1000) == pytest.approx(0.3 * (a + 0.5))


def test_conditional_max_against_enumeration():
    d, a, lp, n, alpha, c, cp = 2, 1, 6, 20, Fraction(7, 10), 0.3, 0.08
    rows = _all_rows(n)
    cond = rows[:, :d].sum(axis=1) == a
    ok = EventSpec(alpha, d + 1, n)(rows)
    x = np.maximum(c, cp * rows[:, :lp].sum(axis=1))
    truth = np.mean((x * ok)[cond])
    cert, exact = conditional_max_parts(c, cp, lp, d, a, alpha, n, 10_000)
    assert exact == pytest.approx(truth, abs=1e-12)
    # the certified value accounts for every index past n, so it lies below
    assert cert <= truth
    assert truth - cert < 0.05


def test_terminal_weights_bound_the_tail():
    # h[k] <= P[balanced on ell+1..n | S_ell = k] on a truncated world
    alpha, ell, n = Fraction(7, 10), 6, 20
    h = terminal_tail_weights(alpha, ell, 2000)
    rows = _all_rows(n)
    s = rows[:, :ell].sum(axis=1)
    ok = EventSpec(alpha, ell + 1, n)(rows)
    for k in range(ell + 1):
        sel = s == k
        if sel.any():
            assert h[k] <= ok[sel].mean() + 1e-15
    assert all(x >= y for x, y in zip(h, h[1:]))


def test_terminal_weights_edge_cases():
    assert terminal_tail_weights(1, 10, 20).tolist() == [1.0] * 11
    assert not terminal_tail_weights(Fraction(1, 2), 10, 20).any()
    with pytest.raises(ValueError):
        terminal_tail_weights(Fraction(3, 5), 30, 20)


def test_dp_table_csv():
    text = event_prob_table(Fraction(3, 4), 4).to_csv()
    lines = text.splitlines()
    assert lines[0].startswith("# alpha=3/4 ell=4")
    assert lines[1] == "k,prob,norm_expectation"
    assert len(lines) == 2 + 5
