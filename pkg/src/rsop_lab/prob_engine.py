"""Balancedness probabilities: Chernoff-Hoeffding rates and exact lattice DPs.

S_j counts how many of the top j bids landed on side A.  With index 1 pinned to
side B, S_j - S_{j-1} are fair coin flips for j >= 2.  The event
E_alpha^T = {S_j <= alpha*j for every j in T} is the central object; all
thresholds are exact rationals.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

import numpy as np

from . import _kernels

__all__ = [
    "Threshold",
    "EventSpec",
    "DPTable",
    "TailBound",
    "rate_alpha",
    "single_event_lower",
    "single_event_upper",
    "tail_probability_lower",
    "terminal_tail_weights",
    "conditional_max_parts",
    "event_prob_table",
    "conditional_expectation_table",
    "conditional_max_expectation",
]

# floats are snapped to the nearest rational with a denominator below this
_SNAP_DEN = 10**9


@dataclass(frozen=True, order=False)
class Threshold:
    """An exact rational alpha = alpha_num / alpha_den in [0, 1]."""

    alpha_num: int
    alpha_den: int

    def __post_init__(self):
        if self.alpha_den <= 0:
            raise ValueError("alpha_den must be positive")
        if not 0 <= self.alpha_num <= self.alpha_den:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha_num}/{self.alpha_den}")
        g = math.gcd(self.alpha_num, self.alpha_den)
        if g > 1:
            object.__setattr__(self, "alpha_num", self.alpha_num // g)
            object.__setattr__(self, "alpha_den", self.alpha_den // g)

    @classmethod
    def of(cls, x) -> "Threshold":
        """Coerce a Threshold, Fraction, int, decimal string or float.

        Floats are snapped with ``limit_denominator`` so that a value off by a
        few ulps from a short rational maps to that rational.
        """
        if isinstance(x, Threshold):
            return x
        if isinstance(x, float):
            fr = Fraction(x).limit_denominator(_SNAP_DEN)
        elif isinstance(x, (Rational, str)):
            fr = Fraction(x)
        else:
            raise TypeError(f"cannot interpret {x!r} as a threshold")
        return cls(fr.numerator, fr.denominator)

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.alpha_num, self.alpha_den)

    @property
    def value(self) -> float:
        return self.alpha_num / self.alpha_den

    def admits(self, k: int, j: int) -> bool:
        """True when k/j <= alpha."""
        return k * self.alpha_den <= j * self.alpha_num

    def kmax(self, j: int) -> int:
        return (j * self.alpha_num) // self.alpha_den

    def __lt__(self, other):
        return self.fraction < Threshold.of(other).fraction

    def __le__(self, other):
        return self.fraction <= Threshold.of(other).fraction

    def __str__(self):
        return f"{self.alpha_num}/{self.alpha_den}"


@dataclass(frozen=True)
class EventSpec:
    """E_alpha^T for a contiguous range T = [first..last] (last=None: unbounded)."""

    alpha: Threshold
    first: int
    last: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", Threshold.of(self.alpha))
        if self.first < 1:
            raise ValueError("index range must start at 1 or later")
        if self.last is not None and self.last < self.first:
            raise ValueError("index range is empty")

    @classmethod
    def singleton(cls, alpha, j: int) -> "EventSpec":
        return cls(alpha, j, j)

    def holds(self, in_a: np.ndarray) -> np.ndarray:
        """Vectorised test on a (rows, n) boolean membership matrix."""
        in_a = np.atleast_2d(in_a)
        n = in_a.shape[1]
        last = n if self.last is None else min(self.last, n)
        s = np.cumsum(in_a, axis=1, dtype=np.int64)
        j = np.arange(1, n + 1)
        lo = self.first - 1
        ok = s[:, lo:last] * self.alpha.alpha_den <= j[lo:last] * self.alpha.alpha_num
        return ok.all(axis=1)

    __call__ = holds


@dataclass(frozen=True)
class TailBound:
    """A one-sided probability bound.  ``log_value`` survives underflow."""

    rate: float
    value: float
    direction: str
    log_value: float | None = None


@dataclass
class DPTable:
    """Law of S_ell restricted to a balancedness event.

    ``probs[k]`` is P[E and S_ell = k] given the start state; entries above
    ``ell`` or infeasible under the threshold are zero.
    """

    ell: int
    start_index: int
    start_count: int
    alpha: Threshold
    probs: np.ndarray
    norm_expectations: np.ndarray | None = None
    lam: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def probability(self) -> float:
        return math.fsum(self.probs)

    @property
    def expectation(self) -> float:
        if self.norm_expectations is None:
            raise ValueError("table carries no expectation column")
        return math.fsum(self.norm_expectations)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(
            f"# alpha={self.alpha} ell={self.ell} start=({self.start_index},{self.start_count})"
            + (f" lambda={self.lam}" if self.lam is not None else "")
            + "\n"
        )
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "prob", "norm_expectation"])
        for k, p in enumerate(self.probs):
            e = "" if self.norm_expectations is None else repr(float(self.norm_expectations[k]))
            w.writerow([k, repr(float(p)), e])
        return buf.getvalue()


def _xlogx(x: float) -> float:
    return 0.0 if x <= 0.0 else x * math.log(x)


def rate_alpha(alpha) -> float:
    """r_alpha = 1 / (2 alpha^alpha (1-alpha)^(1-alpha)), with r_0 = r_1 = 1/2."""
    a = Threshold.of(alpha).value
    return 0.5 * math.exp(-(_xlogx(a) + _xlogx(1.0 - a)))


def single_event_lower(alpha, j: int) -> TailBound:
    """Lower bound 1 - r_alpha^j on P[S_j <= alpha*j] (needs alpha >= 1/2)."""
    t = Threshold.of(alpha)
    if t.fraction < Fraction(1, 2):
        raise ValueError("single_event_lower needs alpha >= 1/2")
    if j < 1:
        raise ValueError("j must be positive")
    r = rate_alpha(t)
    return TailBound(r, max(0.0, 1.0 - r**j), "lower")


def single_event_upper(alpha, j: int) -> TailBound:
    """Upper bound r_{alpha+1/j}^(j-1) on P[S_j <= alpha*j] (needs alpha <= 1/2 - 1/j)."""
    t = Threshold.of(alpha)
    if j < 2 or t.fraction > Fraction(1, 2) - Fraction(1, j):
        raise ValueError("single_event_upper needs alpha <= 1/2 - 1/j")
    r = rate_alpha(Threshold.of(t.fraction + Fraction(1, j)))
    return TailBound(r, min(1.0, r ** (j - 1)), "upper")


def _log1m_product(r: float, lo: int, hi: int) -> float:
    """log prod_{j=lo}^{hi} (1 - r^j)."""
    if hi < lo or r == 0.0:
        return 0.0
    j = np.arange(lo, hi + 1, dtype=np.float64)
    terms = np.log1p(-np.power(r, j))
    return math.fsum(terms)


def tail_probability_lower(alpha, ell: int, ell_prime: int) -> TailBound:
    """Lower bound on P[S_j <= alpha*j for all j > ell].

    Exact products for ell < j <= ell_prime and a union bound beyond.  Returns
    value 0 for alpha <= 1/2 (the rate is 1 and nothing decays) and value 1 for
    alpha = 1, where the event is certain.
    """
    t = Threshold.of(alpha)
    if ell > ell_prime:
        raise ValueError("need ell <= ell_prime")
    r = rate_alpha(t)
    if t.fraction <= Fraction(1, 2):
        return TailBound(r, 0.0, "lower", -math.inf)
    if t.fraction == 1:
        return TailBound(r, 1.0, "lower", 0.0)
    head = 1.0 - r ** (ell_prime + 1) / (1.0 - r)
    if head <= 0.0:
        return TailBound(r, 0.0, "lower", -math.inf)
    log_value = math.log(head) + _log1m_product(r, ell + 1, ell_prime)
    return TailBound(r, min(1.0, math.exp(log_value)), "lower", log_value)


def terminal_tail_weights(alpha, ell: int, ell_prime: int) -> np.ndarray:
    """h[k]: lower bound on P[S_j <= alpha*j for all j > ell | S_ell = k].

    From state k a violation at j needs Bin(j - ell) to exceed the fraction
    beta_j = (alpha*j - k)/(j - ell), which has probability at most
    r_{beta_j}^(j-ell) when beta_j >= 1/2.  The per-index events are
    decreasing, so positive correlation multiplies them up to ell_prime; past
    ell_prime beta_j >= alpha and a union bound with r_alpha finishes.  The
    bound is non-increasing in k, so once it reaches 1.0 it is copied to all
    smaller k.  Infeasible states (k > alpha*ell) get 0.
    """
    t = Threshold.of(alpha)
    if ell > ell_prime:
        raise ValueError("need ell <= ell_prime")
    h = np.zeros(ell + 1)
    kmax = min(t.kmax(ell), ell)
    if t.fraction == 1:
        h[: kmax + 1] = 1.0
        return h
    if t.fraction <= Fraction(1, 2):
        return h
    r_alpha = rate_alpha(t)
    rest = r_alpha ** (ell_prime + 1 - ell) / (1.0 - r_alpha)
    if rest >= 1.0:
        return h
    log_rest = math.log1p(-rest)
    return _kernels.tail_weights(t.alpha_num, t.alpha_den, ell, ell_prime,
                                 math.log(r_alpha), log_rest)


def _check_start(t: Threshold, ell: int, start) -> tuple[int, int, bool]:
    d, a = start
    if d < 1 or a < 0 or a > d:
        raise ValueError(f"inconsistent start {start}")
    if d == 1 and a != 0 and not t.admits(a, d):
        # index 1 sits inside the constrained range for the pinned convention
        raise ValueError(f"start {start} already violates alpha={t}")
    if ell < d:
        raise ValueError("ell must be at least the start index")
    return d, a, d == 1


def event_prob_table(alpha, ell: int, start=(1, 0)) -> DPTable:
    """Exact law of S_ell on E_alpha^{[d+1..ell]} given S_d = a.

    ``start=(1, 0)`` is the pinned convention (index 1 in B), in which case the
    range effectively starts at 1.
    """
    t = Threshold.of(alpha)
    d, a, check = _check_start(t, ell, start)
    probs = _kernels.forward_table(t.alpha_num, t.alpha_den, ell, d, a, check)
    return DPTable(ell, d, a, t, np.array(probs))


def conditional_expectation_table(alpha, ell: int, lam: int) -> DPTable:
    """E_n[S_lam/lam | E_alpha^{[1..ell]}] split by the value of S_ell.

    Runs the two coupled recurrences forward: masses P[E and S_j = k] up to
    lam, then normalised expectations e_j(k) seeded with (k/lam) P[...] at
    j = lam and propagated by the same half-half transition.
    """
    t = Threshold.of(alpha)
    if lam < 2:
        raise ValueError("lambda must be at least 2")
    if lam > ell:
        raise ValueError("lambda must not exceed ell")
    p = np.zeros(ell + 2)
    p[0] = 1.0
    e = None
    kk = np.arange(ell + 2)
    for j in range(2, ell + 1):
        feas = kk <= t.kmax(j)
        p = np.where(feas, 0.5 * p + 0.5 * np.concatenate(([0.0], p[:-1])), 0.0)
        if e is not None:
            e = np.where(feas, 0.5 * e + 0.5 * np.concatenate(([0.0], e[:-1])), 0.0)
        if j == lam:
            e = kk / lam * p
    return DPTable(ell, 1, 0, t, p[: ell + 1], e[: ell + 1], lam)


def conditional_max_parts(c, c_prime, lambda_prime, d, a, alpha, ell, ell_prime):
    """(certified value, exact truncated value) for conditional_max_expectation."""
    t = Threshold.of(alpha)
    if not (0 <= a <= d < lambda_prime):
        raise ValueError("need a <= d < lambda'")
    if c < 0 or c_prime < 0:
        raise ValueError("c and c' must be non-negative")
    if lambda_prime > ell:
        raise ValueError("lambda' must not exceed ell")
    f = _kernels.forward_table(t.alpha_num, t.alpha_den, lambda_prime, d, a, False)
    rows = np.array([lambda_prime], dtype=np.int64)
    k = np.arange(lambda_prime + 1)
    x = np.maximum(c, c_prime * k)
    ones = np.ones(ell + 1)
    g_exact = _kernels.backward_rows(t.alpha_num, t.alpha_den, ell, d, rows, ones)[0, : lambda_prime + 1]
    h = terminal_tail_weights(t, ell, ell_prime)
    g_cert = _kernels.backward_rows(t.alpha_num, t.alpha_den, ell, d, rows, h)[0, : lambda_prime + 1]
    return math.fsum(x * f * g_cert), math.fsum(x * f * g_exact)


def conditional_max_expectation(c, c_prime, lambda_prime, d, a, alpha, ell, ell_prime) -> float:
    """Certified lower bound on E_n[max(c, c' S_{lambda'}) | S_d = a, E_alpha^{[d+1,inf)}].

    The DP is exact on [d+1..ell].  For the remaining indices the Markov
    property lets each end state S_ell = k carry its own lower bound on the
    probability that the tail stays balanced (``terminal_tail_weights``).
    Multiplying the whole expectation by one unconditional tail probability
    would need X and the tail event to be positively correlated, but X grows
    with S while the tail event shrinks.
    """
    return conditional_max_parts(c, c_prime, lambda_prime, d, a, alpha, ell, ell_prime)[0]
