import dataclasses
import itertools
import json
import random
from fractions import Fraction

import numpy as np
import pytest

from rsop_lab.basic_bound import GridParams
from rsop_lab.core import BidVector, opt_revenue
from rsop_lab.oracle import exact_expected_revenue
from rsop_lab.prob_engine import conditional_max_expectation
from rsop_lab.xsearch_bound import (
    XSearchParams,
    config_bound,
    constants_for_subset,
    enumerate_configs,
    find_covering_config,
    precompute,
    refine,
    rsop_min_expect_lower,
    xsearch_bound,
    z_lower_sequence,
)

TINY = GridParams.uniform(6, 60, 2000)


def covered_instance(lam, n, rng):
    """Random non-increasing bids with lam * v_lam = 1 the largest-index optimum."""
    v = [None] * (n + 1)
    v[lam] = Fraction(1, lam)
    for j in range(lam - 1, 0, -1):
        hi = Fraction(1, j) if j >= 2 else Fraction(3)
        v[j] = v[j + 1] + (hi - v[j + 1]) * Fraction(rng.randint(0, 100), 100)
    for j in range(lam + 1, n + 1):
        hi = min(v[j - 1], Fraction(999, 1000 * j))
        v[j] = hi * Fraction(rng.choice([0, rng.randint(0, 100), 100]), 100)
    return v[1:]


def test_single_config_pins_lambda():
    cfgs = [c for _, c in enumerate_configs(2, 1, 1, 2)]
    assert len(cfgs) == 1
    c = cfgs[0]
    assert c.bid_lo(2) == c.bid_hi(2) == Fraction(1, 2)
    assert (c.opt_lo, c.opt_hi) == (0, 1)


def test_infeasible_boxes_are_skipped():
    raw = 2 ** 2 * 4
    got = list(enumerate_configs(3, 2, 4, 2))
    assert 0 < len(got) < raw
    for _, c in got:
        assert c.feasible
        assert all(lo <= hi for lo, hi in zip(c.lo, c.hi))
    # slice 1 of v_2 is [0, 1/4], which cannot hold v_2 = 1/2
    assert all(c.slices[0] == 2 for _, c in got)
    assert not refine(3, 2, 4, 2, (1, 1), 1).feasible


def test_enumeration_size_bound():
    assert len(list(enumerate_configs(4, 3, 5, 2))) <= 3 ** 3 * 5
    with pytest.raises(ValueError):
        list(enumerate_configs(1, 2, 2, 2))


@pytest.mark.parametrize("lam", [2, 3, 4, 7])
def test_refinement_invariants(lam):
    d = 4
    for _, c in enumerate_configs(d, 3, 6, lam):
        for j in range(2, d + 1):
            assert 0 <= c.bid_lo(j) <= c.bid_hi(j) <= Fraction(1, j)
            assert j * c.bid_hi(j) <= 1
            if j < d:
                assert c.bid_lo(j) >= c.bid_lo(j + 1) and c.bid_hi(j) >= c.bid_hi(j + 1)
            if lam < j <= d:
                assert j * c.bid_hi(j) <= c.opt_hi
        if lam <= d:
            assert c.bid_lo(lam) == c.bid_hi(lam) == Fraction(1, lam)
        assert 0 <= c.opt_lo <= c.opt_hi <= 1


def test_subset_constants_examples():
    c = refine(2, 1, 1, 2, (1,), 1)
    e = constants_for_subset(c, (), [Fraction(3, 4)])
    assert e.r_lower == 0 and e.price_set == frozenset()
    assert e.z_lower_by_alpha[next(iter(e.z_lower_by_alpha))] == Fraction(1, 3)
    t = constants_for_subset(c, {2}, [Fraction(3, 4)])
    assert t.s[1] == 1 and t.r_lower == Fraction(1, 2)
    assert list(t.z_lower_by_alpha.values()) == [Fraction(1, 3)]
    # OPT' at most 0.6: R_low = 1/2 > 0.75 * 0.6
    c6 = refine(2, 1, 5, 2, (1,), 3)
    assert c6.opt_hi == Fraction(3, 5)
    assert list(constants_for_subset(c6, {2}, [Fraction(3, 4)]).z_lower_by_alpha.values()) == [1]


def test_subset_constants_reject_bad_input():
    c = refine(3, 1, 1, 2, (1, 1), 1)
    with pytest.raises(ValueError):
        constants_for_subset(c, {1})
    with pytest.raises(ValueError):
        constants_for_subset(refine(3, 2, 4, 2, (1, 1), 1), ())


@pytest.mark.parametrize("lam", [2, 3, 6])
def test_z_lower_non_increasing(lam):
    d = 4
    for _, c in enumerate_configs(d, 2, 4, lam):
        for size in range(d):
            for T in itertools.combinations(range(2, d + 1), size):
                seq = z_lower_sequence(c, T, TINY)
                assert all(x >= y for x, y in zip(seq, seq[1:]))


def test_table_never_exceeds_direct_evaluation():
    params = XSearchParams(2, d=3, theta=2, m_prime=6, grid=TINY)
    table = precompute(params)
    g = TINY
    d, mp = 3, 6
    for i, alpha in enumerate(list(g.alphas)[::2]):
        idx = 2 * i
        for a in range(d):
            for ci in (0, 2, 5):
                for cpi in (0, 3, 6):
                    direct = min(conditional_max_expectation(ci / mp, cpi / mp / lp, lp, d, a, alpha,
                                                             g.ell, g.ell_prime)
                                 for lp in range(d + 1, g.ell + 1))
                    cached = table.values[idx][a, ci, cpi]
                    # the cache also folds in the separation estimate for lam' past the horizon
                    assert cached <= direct + 1e-12


def test_cache_is_a_pure_function():
    params = XSearchParams(3, d=3, theta=2, m_prime=4, grid=TINY)
    a, b = precompute(params), precompute(params, workers=3)
    for x, y in zip(a.values, b.values):
        assert np.array_equal(x, y)


def test_single_lambda_prime_example():
    g = GridParams.uniform(4, 40, 2000)
    cfg = refine(2, 1, 10, 2, (1,), 10)
    assert (cfg.opt_lo, cfg.opt_hi) == (Fraction(9, 10), 1)
    val = rsop_min_expect_lower(2, cfg, 3, g)
    truth = exact_expected_revenue(BidVector((1.0, 0.5, 0.3)), "rsop", "adversarial_min").value
    assert 0 < val <= truth
    with pytest.raises(ValueError):
        rsop_min_expect_lower(2, cfg, 2, g)


def test_single_lambda_prime_all_zero_lower_ends():
    g = GridParams.uniform(4, 40, 2000)
    cfg = refine(3, 1, 1, 4, (1, 1), None)
    assert all(x == Fraction(1, 4) for x in cfg.lo)
    cfg0 = refine(3, 1, 1, 2, (1, 1), 1)
    assert rsop_min_expect_lower(2, cfg0, 5, g) >= 0


def test_single_lambda_prime_monotone_in_opt_lower():
    g = GridParams.uniform(4, 40, 2000)
    # only the lower end moves; the upper end feeds the Z_low cap
    top = refine(2, 1, 10, 2, (1,), 10)
    vals = [rsop_min_expect_lower(2, dataclasses.replace(top, opt_lo=Fraction(k, 10)), 7, g)
            for k in range(11)]
    assert all(x <= y + 1e-15 for x, y in zip(vals, vals[1:]))


def test_large_lambda_prime_branch():
    g = GridParams.uniform(4, 40, 2000)
    cfg = refine(3, 1, 4, 2, (1, 1), 4)
    v = rsop_min_expect_lower(2, cfg, 40, g, large=True)
    assert 0 <= v <= 1


@pytest.mark.parametrize("lam", [2, 3, 5, 8])
def test_coverage_and_soundness(lam):
    rng = random.Random(100 + lam)
    params = XSearchParams(lam, d=4, theta=2, m_prime=8, grid=TINY)
    table = precompute(params)
    for _ in range(25):
        n = rng.randint(max(lam, 4), 14)
        v = covered_instance(lam, n, rng)
        opt = opt_revenue(BidVector.from_values(v))
        assert opt.lam == lam and opt.opt_value == pytest.approx(1.0)
        cfg = find_covering_config(v, params)
        assert cfg is not None
        bound = config_bound(cfg, params, table)
        truth = exact_expected_revenue(BidVector.from_values(v), "rsop", "adversarial_min").value
        assert bound <= truth + 1e-12


@pytest.mark.parametrize("lam", [2, 3])
def test_finer_boxes_never_lower_the_bound(lam):
    coarse = xsearch_bound(XSearchParams(lam, d=3, theta=1, m_prime=2, grid=TINY)).bound
    fine = xsearch_bound(XSearchParams(lam, d=3, theta=2, m_prime=4, grid=TINY)).bound
    assert fine >= coarse - 1e-12


def test_report_fields():
    rep = xsearch_bound(XSearchParams(2, d=3, theta=2, m_prime=4, grid=TINY))
    assert 0 < rep.bound < 0.5
    assert rep.regime == "xsearch"
    am = rep.components["argmin"]
    cfg = refine(3, 2, 4, 2, tuple(am["slices"]), am["opt_slice"])
    params = XSearchParams(2, d=3, theta=2, m_prime=4, grid=TINY)
    assert config_bound(cfg, params, precompute(params)) == rep.bound


def test_checkpoint_resume_is_exact(tmp_path):
    params = XSearchParams(2, d=3, theta=2, m_prime=6, grid=TINY)
    full = xsearch_bound(params)
    ck = tmp_path / "ck.json"
    first = list(enumerate_configs(3, 2, 6, 2))
    # stop part-way by writing a checkpoint over a prefix, then resume
    from rsop_lab.xsearch_bound import _save_checkpoint
    table = precompute(params)
    mid = first[len(first) // 2][0]
    best = min(config_bound(c, params, table) for i, c in first if i < mid)
    _save_checkpoint(str(ck), params, mid, best, None)
    resumed = xsearch_bound(params, checkpoint=str(ck), table=table)
    assert resumed.bound == full.bound
    data = json.loads(ck.read_text())
    assert data["next_index"] == 2 * 2 * 6
    other = XSearchParams(2, d=3, theta=2, m_prime=4, grid=TINY)
    with pytest.raises(ValueError):
        xsearch_bound(other, checkpoint=str(ck))
