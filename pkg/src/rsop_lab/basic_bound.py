"""The decomposition lower bound on E[(S_lam/lam) Z] and its E[Z] companions.

Z = min(min_j (j - S_j)/S_j, 1) measures how balanced the split is.  On the
event that no prefix puts more than alpha*j of its bids on side A, Z is at
least 1/alpha - 1, so slicing the range of max_j S_j/j with a grid of alphas
gives a lower bound

    sum_i (1/alpha_i - 1/alpha_{i+1}) E_n[S_lam/lam | E_{alpha_i}]

where each normalised expectation comes from an exact DP on the first ell
indices minus a Chernoff allowance for the indices beyond.
"""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import _kernels
from .prob_engine import Threshold, single_event_upper, tail_probability_lower

__all__ = [
    "GridParams",
    "BoundReport",
    "basic_bounds",
    "ez_decomposition_bound",
    "expected_z_lower",
    "expected_z_upper",
    "large_lambda_bound",
    "table1",
    "reports_to_csv",
    "reports_to_json",
]


@dataclass(frozen=True)
class GridParams:
    """Alpha grid in (1/2, 1) plus the exact DP horizon ell and tail horizon ell'."""

    alphas: tuple
    ell: int = 5000
    ell_prime: int = 100_000

    def __post_init__(self):
        al = tuple(Threshold.of(a) for a in self.alphas)
        if not al:
            raise ValueError("the grid needs at least one alpha")
        fr = [a.fraction for a in al]
        if fr[0] <= Fraction(1, 2) or fr[-1] >= 1:
            raise ValueError("grid values must lie strictly between 1/2 and 1")
        if any(x >= y for x, y in zip(fr, fr[1:])):
            raise ValueError("grid must be strictly increasing")
        if self.ell < 2 or self.ell > self.ell_prime:
            raise ValueError("need 2 <= ell <= ell_prime")
        object.__setattr__(self, "alphas", al)

    @property
    def m(self) -> int:
        return len(self.alphas)

    @classmethod
    def uniform(cls, m: int = 100, ell: int = 5000, ell_prime: int = 100_000) -> "GridParams":
        """alpha_i = 1/2 + i/(2(m+1)): m equally spaced points inside (1/2, 1)."""
        if m < 1:
            raise ValueError("m must be positive")
        return cls(tuple(Fraction(1, 2) + Fraction(i, 2 * (m + 1)) for i in range(1, m + 1)),
                   ell, ell_prime)

    @classmethod
    def literal(cls, m: int = 100, ell: int = 5000, ell_prime: int = 100_000) -> "GridParams":
        """alpha_i = 1/2 + i/(m+1), keeping only the points below 1."""
        pts = [Fraction(1, 2) + Fraction(i, m + 1) for i in range(1, m + 1)]
        return cls(tuple(a for a in pts if a < 1), ell, ell_prime)

    def weights(self) -> list[float]:
        """1/alpha_i - 1/alpha_{i+1}, with alpha_{m+1} = 1."""
        fr = [a.fraction for a in self.alphas] + [Fraction(1)]
        return [float(1 / x - 1 / y) for x, y in zip(fr, fr[1:])]

    def describe(self) -> dict:
        return {
            "m": self.m,
            "alpha_first": str(self.alphas[0]),
            "alpha_last": str(self.alphas[-1]),
            "ell": self.ell,
            "ell_prime": self.ell_prime,
        }


@dataclass
class BoundReport:
    lam: int
    bound: float
    regime: str
    params: GridParams | None = None
    components: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.bound <= 1.0:
            raise ValueError(f"bound {self.bound} outside [0, 1]")

    @property
    def competitive_ratio(self) -> float:
        return math.inf if self.bound == 0.0 else 1.0 / self.bound


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@lru_cache(maxsize=4096)
def _cell(alpha: Threshold, ell: int, lams: tuple) -> tuple:
    total, en = _kernels.cell_expectations(alpha.alpha_num, alpha.alpha_den, ell,
                                           np.array(lams, dtype=np.int64))
    return float(total), tuple(float(x) for x in en)


@lru_cache(maxsize=4096)
def _aggregate(alpha: Threshold, ell: int) -> float:
    return float(_kernels.forward_aggregate(alpha.alpha_num, alpha.alpha_den, ell))


@lru_cache(maxsize=4096)
def _tail(alpha: Threshold, ell: int, ell_prime: int) -> float:
    return tail_probability_lower(alpha, ell, ell_prime).value


def basic_bounds(lams, g: GridParams, workers: int = 1, clamp: bool = True) -> list[BoundReport]:
    """Decomposition bound for every lam in ``lams`` from one pass per alpha."""
    lams = sorted(set(int(x) for x in lams))
    if not lams:
        return []
    if lams[0] < 2:
        raise ValueError("lambda must be at least 2")
    if lams[-1] > g.ell:
        raise ValueError(f"lambda {lams[-1]} exceeds ell={g.ell}; raise ell or use the large-lambda bound")
    key = tuple(lams)

    def work(a):
        p, en = _cell(a, g.ell, key)
        return p, en, _tail(a, g.ell, g.ell_prime)

    cells = _map(work, g.alphas, workers)
    w = g.weights()
    reports = []
    for idx, lam in enumerate(lams):
        terms = []
        for wi, (p, en, tl) in zip(w, cells):
            eps = p * (1.0 - tl)
            c = en[idx] - eps
            terms.append(wi * (max(0.0, c) if clamp else c))
        value = min(1.0, max(0.0, math.fsum(terms)))
        reports.append(BoundReport(lam, value, "small_lambda", g,
                                   {"cells_used": sum(1 for t in terms if t > 0)}))
    return reports


def ez_decomposition_bound(lam: int, g: GridParams, workers: int = 1) -> BoundReport:
    """Certified lower bound on E[(S_lam/lam) Z], hence on E[RSOP]/OPT."""
    return basic_bounds([lam], g, workers)[0]


def expected_z_lower(g: GridParams, workers: int = 1) -> float:
    """sum_i (1/alpha_i - 1/alpha_{i+1}) P[E_{alpha_i}^{[1..ell]}] * tail lower bound."""
    def work(a):
        return _aggregate(a, g.ell) * _tail(a, g.ell, g.ell_prime)

    vals = _map(work, g.alphas, workers)
    return math.fsum(w * v for w, v in zip(g.weights(), vals))


def expected_z_upper(g: GridParams, workers: int = 1) -> float:
    """Upper bound on E[Z] from the same grid.

    With M = max_j S_j/j, Z = 1/M - 1 <= z_{i-1} = 1/alpha_{i-1} - 1 whenever
    alpha_{i-1} < M <= alpha_i, where alpha_0 = 1/2 (z_0 = 1) and
    alpha_{m+1} = 1 (z_m is the smallest cap).  Summing by parts,

        E[Z] <= z_m + sum_i (z_{i-1} - z_i) P[M <= alpha_i],

    and dropping the constraints beyond ell only enlarges each event.
    """
    fr = [Fraction(1, 2)] + [a.fraction for a in g.alphas]
    z = [1 / a - 1 for a in fr]
    probs = _map(lambda a: _aggregate(a, g.ell), g.alphas, workers)
    terms = [float(z[i - 1] - z[i]) * probs[i - 1] for i in range(1, len(fr))]
    return math.fsum(terms) + float(z[-1])


def large_lambda_bound(lam: int, alpha, z_lower: float) -> BoundReport:
    """alpha * (E[Z] lower bound - P[S_lam <= alpha*lam] upper bound), floored at 0."""
    a = Threshold.of(alpha)
    upper = single_event_upper(a, lam)
    value = a.value * (z_lower - upper.value)
    return BoundReport(lam, min(1.0, max(0.0, value)), "large_lambda", None,
                       {"alpha": str(a), "z_lower": z_lower, "single_event_upper": upper.value})


def table1(lams, g: GridParams, large_cutoff: int = 5000, large_alpha=Fraction(12, 25),
           workers: int = 1) -> list[BoundReport]:
    """Bounds per lambda: the decomposition up to the cutoff, then the better of
    that and the large-lambda separation."""
    lams = sorted(set(int(x) for x in lams))
    small = [x for x in lams if x <= g.ell]
    by_lam = {r.lam: r for r in basic_bounds(small, g, workers)} if small else {}
    z_lower = None
    out = []
    for lam in lams:
        rep = by_lam.get(lam)
        if lam > large_cutoff:
            if z_lower is None:
                z_lower = expected_z_lower(g, workers)
            big = large_lambda_bound(lam, large_alpha, z_lower)
            big.params = g
            if rep is None or big.bound > rep.bound:
                rep = big
        if rep is None:
            raise ValueError(f"lambda={lam} is above ell={g.ell} but not above the cutoff {large_cutoff}")
        out.append(rep)
    return out


def reports_to_csv(reports, extra: dict | None = None) -> str:
    buf = io.StringIO()
    meta = dict(extra or {})
    if reports and reports[0].params is not None:
        meta.update(reports[0].params.describe())
    buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    buf.write("lambda,bound,ratio,regime\n")
    for r in reports:
        buf.write(f"{r.lam},{r.bound:.6f},{r.competitive_ratio:.6f},{r.regime}\n")
    return buf.getvalue()


def reports_to_json(reports, extra: dict | None = None) -> str:
    rows = []
    for r in reports:
        rows.append({
            "lambda": r.lam,
            "bound": r.bound,
            "ratio": r.competitive_ratio,
            "regime": r.regime,
            "components": r.components,
        })
    meta = dict(extra or {})
    if reports and reports[0].params is not None:
        meta.update(reports[0].params.describe())
    return json.dumps({"params": meta, "rows": rows}, indent=2, sort_keys=True) + "\n"
