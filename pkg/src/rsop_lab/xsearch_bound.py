"""Exhaustive-search lower bound over boxes of normalised instances.

Normalise OPT = 1 at index lam.  The top d bids are boxed: bid j lies in one
of theta equal slices of [0, 1/j], and the second optimum OPT' (the best j*v_j
over j > lam) lies in one of m' slices of [0, 1].  For a box and a set T of
top-d indices that land on side A, the revenue B pays is at least

    Z * max(R_low(T), (S_lam'/lam') OPT'_low),

where Z is bounded below on each balancedness event by constants that only
depend on the box.  The expectation of the max is precomputed once per
(|T|, alpha, rounded R_low, rounded OPT'_low), minimised over lam'.  The
bound for lam is the minimum over all feasible boxes.

Index 1 always sits on side B, so v_1 never enters a constant and is not
sliced.  When lam > d, lam itself plays the part of lam' (OPT' is not needed).
"""

from __future__ import annotations

import bisect
import itertools
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from . import _kernels
from .basic_bound import BoundReport, GridParams
from .prob_engine import Threshold, conditional_max_expectation, rate_alpha, terminal_tail_weights

__all__ = [
    "IntervalConfig",
    "SubsetConstants",
    "XSearchParams",
    "PrecomputedTable",
    "enumerate_configs",
    "refine",
    "constants_for_subset",
    "z_lower_sequence",
    "precompute",
    "rsop_min_expect_lower",
    "config_bound",
    "xsearch_bound",
    "find_covering_config",
]

LARGE_ALPHA = Fraction(12, 25)


@dataclass(frozen=True)
class IntervalConfig:
    """Bid boxes for indices 2..d (index j at position j-2) and an OPT' box."""

    d: int
    theta: int
    m_prime: int
    lam: int
    slices: tuple
    opt_slice: int | None
    lo: tuple
    hi: tuple
    opt_lo: Fraction
    opt_hi: Fraction
    feasible: bool

    def bid_lo(self, j: int) -> Fraction:
        return self.lo[j - 2]

    def bid_hi(self, j: int) -> Fraction:
        return self.hi[j - 2]

    def contains(self, bids, opt_prime) -> bool:
        """True when bids[1..d] (1-based list with bids[0] = v_1) and OPT' fit the box."""
        for j in range(2, self.d + 1):
            v = Fraction(bids[j - 1]) if j <= len(bids) else Fraction(0)
            if not self.bid_lo(j) <= v <= self.bid_hi(j):
                return False
        if self.lam <= self.d:
            return self.opt_lo <= Fraction(opt_prime) <= self.opt_hi
        return True


def refine(d, theta, m_prime, lam, slices, opt_slice) -> IntervalConfig:
    """Shrink raw slices with the constraints every normalised instance obeys."""
    lo = [Fraction(i - 1, theta * j) for j, i in zip(range(2, d + 1), slices)]
    hi = [Fraction(i, theta * j) for j, i in zip(range(2, d + 1), slices)]
    if opt_slice is None:
        o_lo, o_hi = Fraction(0), Fraction(1)
    else:
        o_lo, o_hi = Fraction(opt_slice - 1, m_prime), Fraction(opt_slice, m_prime)
    pin = Fraction(1, lam)
    if lam <= d:
        lo[lam - 2] = max(lo[lam - 2], pin)
        hi[lam - 2] = min(hi[lam - 2], pin)
    else:
        lo = [max(x, pin) for x in lo]
    changed = True
    while changed:
        old = (tuple(lo), tuple(hi), o_lo, o_hi)
        if lam <= d:
            for j in range(lam + 1, d + 1):
                hi[j - 2] = min(hi[j - 2], o_hi / j)
                o_lo = max(o_lo, j * lo[j - 2])
        for j in range(d - 1, 1, -1):
            lo[j - 2] = max(lo[j - 2], lo[j - 1])
        for j in range(3, d + 1):
            hi[j - 2] = min(hi[j - 2], hi[j - 3])
        changed = old != (tuple(lo), tuple(hi), o_lo, o_hi)
    feasible = all(x <= y for x, y in zip(lo, hi)) and o_lo <= o_hi
    return IntervalConfig(d, theta, m_prime, lam, tuple(slices), opt_slice,
                          tuple(lo), tuple(hi), o_lo, o_hi, feasible)


def _raw_configs(d, theta, m_prime, lam):
    opt_range = range(1, m_prime + 1) if lam <= d else [None]
    for slices in itertools.product(range(1, theta + 1), repeat=d - 1):
        for i_opt in opt_range:
            yield slices, i_opt


def enumerate_configs(d: int, theta: int, m_prime: int, lam: int,
                      start: int = 0) -> Iterator[tuple[int, IntervalConfig]]:
    """Yield (index, config) for every feasible refined box, in a fixed order."""
    if d < 2 or theta < 1 or m_prime < 1 or lam < 2:
        raise ValueError("need d >= 2, theta >= 1, m' >= 1 and lambda >= 2")
    for idx, (slices, i_opt) in enumerate(_raw_configs(d, theta, m_prime, lam)):
        if idx < start:
            continue
        cfg = refine(d, theta, m_prime, lam, slices, i_opt)
        if cfg.feasible:
            yield idx, cfg


@dataclass(frozen=True)
class SubsetConstants:
    subset: frozenset
    s: tuple
    z: tuple
    r_lower: Fraction
    price_set: frozenset
    z_lower_by_alpha: dict = field(default_factory=dict)


def _counts(d, T):
    s, acc = [], 0
    for j in range(1, d + 1):
        acc += j in T
        s.append(acc)
    return s


def _cap(cfg: IntervalConfig) -> Fraction:
    return cfg.opt_hi if cfg.lam <= cfg.d else Fraction(1)


def constants_for_subset(cfg: IntervalConfig, T, alphas=()) -> SubsetConstants:
    """R_low, the candidate price set P and the Z lower bounds for subset T."""
    if not cfg.feasible:
        raise ValueError("config is infeasible")
    T = frozenset(T)
    if any(j < 2 or j > cfg.d for j in T):
        raise ValueError("T must be a subset of 2..d")
    d = cfg.d
    s = _counts(d, T)
    z = tuple(Fraction(j - s[j - 1], s[j - 1]) if s[j - 1] else None for j in range(1, d + 1))
    r_lower = max([s[j - 1] * cfg.bid_lo(j) for j in range(2, d + 1)] + [Fraction(0)])
    price_set = frozenset(j for j in T if s[j - 1] * cfg.bid_hi(j) >= r_lower)
    zl = {}
    cap = _cap(cfg)
    for a in alphas:
        zl[Threshold.of(a)] = _z_lower(z, price_set, r_lower, cap, Threshold.of(a).fraction)
    return SubsetConstants(T, tuple(s), z, r_lower, price_set, zl)


def _z_lower(z, price_set, r_lower, cap, alpha: Fraction) -> Fraction:
    zp = min((z[j - 1] for j in price_set), default=None)
    if r_lower > alpha * cap:
        # the A side's best price must come from the top d bids
        return zp
    off = (1 - alpha) / alpha
    return off if zp is None else min(zp, off)


def z_lower_sequence(cfg: IntervalConfig, T, g: GridParams) -> list[Fraction]:
    """Z_low at alpha_1..alpha_m and at alpha = 1; checked non-increasing."""
    c = constants_for_subset(cfg, T)
    cap = _cap(cfg)
    seq = [_z_lower(c.z, c.price_set, c.r_lower, cap, a.fraction) for a in g.alphas]
    seq.append(_z_lower(c.z, c.price_set, c.r_lower, cap, Fraction(1)))
    if any(x < y for x, y in zip(seq, seq[1:])):
        raise ArithmeticError(f"Z lower bounds increase with alpha for T={sorted(T)}: {seq}")
    return seq


@dataclass(frozen=True)
class XSearchParams:
    lam: int
    d: int = 5
    theta: int = 2
    m_prime: int = 20
    grid: GridParams = field(default_factory=lambda: GridParams.uniform(20, 2000, 100_000))
    cutoff: int | None = None
    large_alpha: Fraction = LARGE_ALPHA

    @property
    def lp_cutoff(self) -> int:
        return min(self.cutoff or self.grid.ell, self.grid.ell)

    def describe(self) -> dict:
        out = {"lambda": self.lam, "d": self.d, "theta": self.theta, "m_prime": self.m_prime,
               "cutoff": self.lp_cutoff, "large_alpha": str(self.large_alpha)}
        out.update(self.grid.describe())
        return out


@dataclass
class PrecomputedTable:
    """Lower bounds on E_n[max(c, (S_lam'/lam') c') | S_d = a, E_alpha] minimised over lam'.

    ``values[i][a, ci, cpi]`` uses c = ci/m', c' = cpi/m' and the i-th alpha
    (the last one is alpha = 1); ``p_event[i][a]`` lower-bounds P[E_alpha | S_d = a].
    """

    alphas: list
    values: list
    p_event: list
    m_prime: int

    def __post_init__(self):
        self.alpha_fractions = [a.fraction for a in self.alphas]
        self.stacked = np.stack(self.values)
        self.p_stacked = np.stack(self.p_event)
        self.off_diagonal = np.array([float((1 - a) / a) for a in self.alpha_fractions])


def _large_regime(c, cp, p_ev, beta, d, cutoff):
    """M P[E] - (M - c) P[S_lam' <= beta lam'] for every lam' > cutoff.

    The Chernoff lower-tail bound for Bin(lam' - d) below beta*lam' shrinks as
    lam' grows, so lam' = cutoff + 1 is the worst case.
    """
    lp = cutoff + 1
    n = lp - d
    gamma = beta * lp / n
    if gamma >= 0.5:
        u = 1.0
    else:
        u = min(1.0, rate_alpha(Threshold.of(Fraction(gamma).limit_denominator(10**12)
                                             + Fraction(1, 10**12))) ** n)
    big = np.maximum(c, float(beta) * cp)
    return big * p_ev - (big - c) * u


def precompute(params: XSearchParams, workers: int = 1) -> PrecomputedTable:
    g = params.grid
    d, mp = params.d, params.m_prime
    alphas = list(g.alphas) + [Threshold(1, 1)]
    ell, cutoff = g.ell, params.lp_cutoff
    if params.lam > d:
        if params.lam > cutoff:
            raise ValueError("lambda above the DP horizon; raise ell")
        lp_lo = lp_hi = params.lam
        cp_lo = cp_hi = mp
    else:
        lp_lo, lp_hi = d + 1, cutoff
        cp_lo, cp_hi = 0, mp
    if lp_hi <= d:
        raise ValueError("the DP horizon must exceed d")

    def work(a):
        h = terminal_tail_weights(a, ell, g.ell_prime)
        return _kernels.xsearch_table(a.alpha_num, a.alpha_den, ell, d, lp_lo, lp_hi, h,
                                      mp, d - 1, cp_lo, cp_hi)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, alphas))
    else:
        parts = [work(a) for a in alphas]
    values, p_event = [], []
    c = np.arange(mp + 1)[:, None] / mp
    cp = np.arange(mp + 1)[None, :] / mp
    for table, p_ev in parts:
        table = np.array(table)
        if params.lam <= d:
            for a in range(d):
                large = _large_regime(c, cp, p_ev[a], params.large_alpha, d, cutoff)
                table[a] = np.minimum(table[a], large)
        values.append(np.maximum(table, 0.0))
        p_event.append(np.array(p_ev))
    return PrecomputedTable(alphas, values, p_event, mp)


def _floor_index(x: Fraction, m_prime: int) -> int:
    return min(m_prime, math.floor(x * m_prime))


def config_bound(cfg: IntervalConfig, params: XSearchParams, table: PrecomputedTable) -> float:
    """Lower bound on E[RSOP]/OPT over every instance in the box."""
    d, mp = cfg.d, cfg.m_prime
    cpi = _floor_index(cfg.opt_lo, mp) if cfg.lam <= d else mp
    cap = _cap(cfg)
    fracs = table.alpha_fractions
    values, p_event, off = table.stacked, table.p_stacked, table.off_diagonal
    # lam' in (lam, d]: bids fixed by the box; usable when j*v_j can reach OPT'
    small_lp = [lp for lp in range(cfg.lam + 1, d + 1) if lp * cfg.bid_hi(lp) >= cfg.opt_lo]
    total = []
    for size in range(d):
        for T in itertools.combinations(range(2, d + 1), size):
            c = constants_for_subset(cfg, T)
            zp = min((c.z[j - 1] for j in c.price_set), default=None)
            # alphas below R_low/cap force the price into the top d bids
            cut = bisect.bisect_left(fracs, c.r_lower / cap) if cap else len(fracs)
            if zp is None:
                seq = off.copy()
                if cut:
                    raise ArithmeticError(f"empty price set with R_low > 0 for T={T}")
            else:
                seq = np.minimum(off, float(zp))
                seq[:cut] = float(zp)
            w = seq - np.append(seq[1:], 0.0)
            if (w < 0).any():
                raise ArithmeticError(f"Z lower bounds increase with alpha for T={T}")
            term = values[:, size, _floor_index(c.r_lower, mp), cpi]
            for lp in small_lp:
                const = max(c.r_lower, c.s[lp - 1] * cfg.opt_lo / lp)
                term = np.minimum(term, float(const) * p_event[:, size])
            total.append(float(np.dot(w, term)))
    return math.fsum(total) / 2 ** (d - 1)


def rsop_min_expect_lower(lam: int, cfg: IntervalConfig, lambda_prime: int, g: GridParams,
                          large: bool = False, large_alpha=LARGE_ALPHA) -> float:
    """The box bound with a single fixed lam' (direct, uncached evaluation).

    Each expectation is evaluated with ``conditional_max_expectation`` using
    exact R_low and OPT'_low (no rounding).  ``large`` switches to the
    separation estimate valid for every lam' > lambda_prime.
    """
    if cfg.lam != lam:
        raise ValueError("config was built for a different lambda")
    if not cfg.feasible:
        return math.inf
    d = cfg.d
    if lam > d:
        if lambda_prime != lam or large:
            raise ValueError("for lambda > d the only lambda' is lambda itself")
    elif not large and lambda_prime <= lam:
        raise ValueError("lambda' must exceed lambda")
    alphas = list(g.alphas) + [Threshold(1, 1)]
    opt_lo = float(cfg.opt_lo) if lam <= d else 1.0
    total = []
    for size in range(d):
        for T in itertools.combinations(range(2, d + 1), size):
            c = constants_for_subset(cfg, T)
            seq = z_lower_sequence(cfg, T, g)
            for i, alpha in enumerate(alphas):
                nxt = seq[i + 1] if i + 1 < len(seq) else Fraction(0)
                w = float(seq[i] - nxt)
                if w == 0.0:
                    continue
                r = float(c.r_lower)
                if large:
                    p_ev = conditional_max_expectation(1.0, 0.0, d + 1, d, size, alpha, g.ell, g.ell_prime)
                    term = float(_large_regime(r, opt_lo, p_ev, large_alpha, d, lambda_prime))
                elif lambda_prime <= d:
                    p_ev = conditional_max_expectation(1.0, 0.0, d + 1, d, size, alpha, g.ell, g.ell_prime)
                    term = max(r, c.s[lambda_prime - 1] * opt_lo / lambda_prime) * p_ev
                else:
                    term = conditional_max_expectation(r, opt_lo / lambda_prime, lambda_prime, d, size,
                                                       alpha, g.ell, g.ell_prime)
                total.append(w * max(0.0, term))
    return math.fsum(total) / 2 ** (d - 1)


def _load_checkpoint(path, params: XSearchParams):
    if not path or not os.path.exists(path):
        return 0, math.inf, None
    with open(path) as fh:
        data = json.load(fh)
    if data.get("params") != params.describe():
        raise ValueError(f"checkpoint {path} was written for different parameters")
    return data["next_index"], data["best"], data.get("argmin")


def _save_checkpoint(path, params, next_index, best, argmin):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump({"params": params.describe(), "next_index": next_index,
                   "best": best, "argmin": argmin}, fh, sort_keys=True)
    os.replace(tmp, path)


def xsearch_bound(params: XSearchParams, workers: int = 1, checkpoint: str | None = None,
                  checkpoint_every: int = 1000, progress=None,
                  table: PrecomputedTable | None = None) -> BoundReport:
    """Minimum of the box bound over every feasible box.

    With ``checkpoint`` the running minimum and the next raw-config index are
    saved every ``checkpoint_every`` boxes; a rerun resumes from there and
    reaches the same result.
    """
    if table is None:
        table = precompute(params, workers)
    start, best, argmin = _load_checkpoint(checkpoint, params)
    count = 0
    idx = start - 1
    for idx, cfg in enumerate_configs(params.d, params.theta, params.m_prime, params.lam, start):
        val = config_bound(cfg, params, table)
        if val < best:
            best = val
            argmin = {"slices": list(cfg.slices), "opt_slice": cfg.opt_slice}
        count += 1
        if checkpoint and count % checkpoint_every == 0:
            _save_checkpoint(checkpoint, params, idx + 1, best, argmin)
        if progress is not None:
            progress(idx)
    if checkpoint:
        total = params.theta ** (params.d - 1) * (params.m_prime if params.lam <= params.d else 1)
        _save_checkpoint(checkpoint, params, total, best, argmin)
    if best is math.inf:
        raise ValueError("no feasible configuration")
    value = min(1.0, max(0.0, best))
    return BoundReport(params.lam, value, "xsearch", params.grid,
                       {"argmin": argmin, "boxes": count, **params.describe()})


def find_covering_config(bids, params: XSearchParams) -> IntervalConfig | None:
    """The first feasible box containing a normalised instance (OPT = 1 at lam)."""
    d = params.d
    vals = [Fraction(b) for b in bids]
    lam = params.lam
    opt_prime = max((j * vals[j - 1] for j in range(lam + 1, len(vals) + 1)), default=Fraction(0))
    for _, cfg in enumerate_configs(d, params.theta, params.m_prime, lam):
        if cfg.contains(vals, opt_prime):
            return cfg
    return None
