"""Exact RSOP / RSOP* expectations on the equal-revenue instance (1, 1/2, ..., 1/n).

On that instance every price p earns the same total from both sides, so the
price a side sends across is pinned down by that side's largest ratio
M = max_{j on side} (members among the top j)/j: the opposite side pays
exactly 1 - M.  Hence

    E[RSOP*] = E[1 - M_A] + E[1 - M_B],

and each E[M] is a finite Stieltjes sum over the attainable ratios k/j of
P[M <= k/j], one lattice DP per ratio.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .core import make_equal_revenue
from .oracle import monte_carlo_expected_revenue

__all__ = [
    "SideMaxCDF",
    "farey_ratios",
    "side_max_cdf",
    "rsop_star_expectation_equal_revenue",
    "rsop_expectation_equal_revenue",
    "monotonicity_audit",
    "upper_bound_certificate",
    "mc_check",
]

CERTIFIED_RATIO = 2.65
DEFAULT_N = 400


def farey_ratios(n: int) -> tuple[np.ndarray, np.ndarray]:
    """All reduced fractions p/q in [0, 1] with q <= n, ascending (Farey order)."""
    ps, qs = [0], [1]
    a, b, c, d = 0, 1, 1, n
    while c <= n:
        k = (n + b) // d
        a, b, c, d = c, d, k * c - a, k * d - b
        ps.append(a)
        qs.append(b)
    return np.array(ps, dtype=np.int64), np.array(qs, dtype=np.int64)


@dataclass
class SideMaxCDF:
    n: int
    side: str
    convention: str
    ps: np.ndarray
    qs: np.ndarray
    cdf: np.ndarray = field(repr=False)

    @property
    def thresholds(self) -> list[Fraction]:
        return [Fraction(int(p), int(q)) for p, q in zip(self.ps, self.qs)]

    def expected_max(self) -> float:
        """sum_i t_i (F(t_i) - F(t_{i-1})) over the exact support."""
        t = self.ps / self.qs
        jumps = np.diff(self.cdf, prepend=0.0)
        return math.fsum(t * jumps)


def side_max_cdf(n: int, side: str = "A", convention: str = "first_in_B",
                 workers: int = 1) -> SideMaxCDF:
    """P[max ratio on ``side`` <= t] for every attainable t = k/j, j <= n."""
    if n < 1:
        raise ValueError("n must be positive")
    if side not in ("A", "B"):
        raise ValueError("side must be 'A' or 'B'")
    if convention not in ("free", "first_in_B"):
        raise ValueError("convention must be 'free' or 'first_in_B'")
    ps, qs = farey_ratios(n)
    is_a, pinned = side == "A", convention == "first_in_B"
    bounds = np.linspace(0, len(ps), max(1, workers) + 1).astype(int)
    parts = [(lo, hi) for lo, hi in zip(bounds, bounds[1:]) if hi > lo]

    def run(part):
        lo, hi = part
        return _kernels.side_cdf_many(ps[lo:hi], qs[lo:hi], n, is_a, pinned)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run, parts))
    else:
        chunks = [run(p) for p in parts]
    return SideMaxCDF(n, side, convention, ps, qs, np.concatenate(chunks))


def rsop_star_expectation_equal_revenue(n: int, convention: str = "first_in_B",
                                        workers: int = 1) -> float:
    """E[RSOP*] on the n-bid equal-revenue instance (OPT = 1).

    With index 1 pinned to B, M_B = 1 and only side A needs a sweep; the free
    convention sweeps both sides and gives the same number.
    """
    if convention == "first_in_B":
        return 1.0 - side_max_cdf(n, "A", convention, workers).expected_max()
    ea = side_max_cdf(n, "A", convention, workers).expected_max()
    eb = side_max_cdf(n, "B", convention, workers).expected_max()
    return (1.0 - ea) + (1.0 - eb)


def rsop_expectation_equal_revenue(n: int, convention: str = "first_in_B",
                                   workers: int = 1) -> float:
    """RSOP loses exactly the all-on-one-side outcomes, which RSOP* sells at OPT."""
    return rsop_star_expectation_equal_revenue(n, convention, workers) - 2.0 ** (-(n - 1))


def monotonicity_audit(n_max: int, tol: float = 1e-12) -> list[dict]:
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    rows, prev = [], None
    for n in range(1, n_max + 1):
        val = rsop_star_expectation_equal_revenue(n)
        rows.append({"n": n, "value": val, "violation": prev is not None and val > prev + tol})
        prev = val
    return rows


def upper_bound_certificate(lam: int, n: int | None = None, workers: int = 1) -> dict:
    """E[RSOP] on the equal-revenue instance with max(lam, 400) bids.

    Every index there attains OPT, so the instance has lam bids at or above an
    optimal price for any lam <= n; the optimum is not unique, and a vanishing
    perturbation that isolates lam is left analytic.
    """
    if lam < 2:
        raise ValueError("lambda must be at least 2")
    if n is None:
        n = max(lam, DEFAULT_N)
    value = rsop_expectation_equal_revenue(n, workers=workers)
    ratio = math.inf if value == 0 else 1.0 / value
    return {
        "lambda": lam,
        "n": n,
        "rsop": value,
        "rsop_star": value + 2.0 ** (-(n - 1)),
        "ratio": ratio,
        "target_ratio": CERTIFIED_RATIO,
        "certified": ratio > CERTIFIED_RATIO,
        "caveat": "all indices 2..n attain OPT; the unique-optimum version is the limit of small perturbations",
    }


def mc_check(n: int, samples: int = 200_000, seed: int = 0, workers: int = 1) -> dict:
    """Compare the sweep value with a seeded Monte Carlo run of the auction itself."""
    exact = rsop_expectation_equal_revenue(n)
    est = monte_carlo_expected_revenue(make_equal_revenue(n), "rsop", samples=samples,
                                       seed=seed, workers=workers)
    return {
        "n": n,
        "sweep": exact,
        "mc": est.value,
        "ci_halfwidth": est.ci_halfwidth,
        "agrees": abs(est.value - exact) <= est.ci_halfwidth,
        "seed": seed,
        "samples": samples,
    }


def certificate_json(cert: dict) -> str:
    return json.dumps(cert, indent=2, sort_keys=True) + "\n"
