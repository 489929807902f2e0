"""Bid vectors, partitions and single-run RSOP / RSOP* revenue.

Indices are 1-based throughout, matching the usual "top j bids" language:
``v.value(1)`` is the highest bid and anything past the stored length is 0.

Bids may be floats or exact rationals.  When a vector carries exact values,
revenue ties are detected exactly; otherwise two revenues within a relative
1e-12 of each other count as tied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "BidVector",
    "Partition",
    "OptResult",
    "RevenueBreakdown",
    "TiePolicy",
    "REL_TIE_TOL",
    "opt_revenue",
    "optimal_price_index",
    "rsop_revenue",
    "rsop_star_revenue",
    "make_equal_revenue",
    "make_two_value",
    "load_bids",
    "parse_generator",
]

REL_TIE_TOL = 1e-12


class TiePolicy(str, Enum):
    LOWEST_PRICE = "lowest_price"
    HIGHEST_PRICE = "highest_price"
    ADVERSARIAL_MIN = "adversarial_min"

    @classmethod
    def of(cls, x) -> "TiePolicy":
        return x if isinstance(x, cls) else cls(str(x).replace("-", "_"))


@dataclass(frozen=True)
class BidVector:
    """Non-increasing, non-negative bids with an implicit zero tail."""

    bids: tuple
    exact: tuple | None = None

    def __post_init__(self):
        bids = tuple(float(b) for b in self.bids)
        object.__setattr__(self, "bids", bids)
        if self.exact is not None:
            ex = tuple(Fraction(x) for x in self.exact)
            if len(ex) != len(bids):
                raise ValueError("exact values must match the bids one to one")
            object.__setattr__(self, "exact", ex)
        for i, b in enumerate(bids):
            if not b >= 0.0 or math.isinf(b):
                raise ValueError(f"bid {i + 1} is not a finite non-negative number: {b}")
            if i and b > bids[i - 1]:
                raise ValueError("bids must be sorted non-increasing")

    @classmethod
    def from_values(cls, values: Iterable) -> "BidVector":
        """Sort arbitrary bids; Fractions and ints are kept as exact values."""
        vals = sorted(values, reverse=True)
        exact = None
        if vals and all(isinstance(x, (int, Fraction)) for x in vals):
            exact = tuple(Fraction(x) for x in vals)
        return cls(tuple(vals), exact)

    @property
    def n(self) -> int:
        return len(self.bids)

    @property
    def n_positive(self) -> int:
        return sum(1 for b in self.bids if b > 0.0)

    def value(self, j: int):
        """Bid at 1-based index j (exact if available); 0 beyond the stored part."""
        if j < 1:
            raise IndexError("bid indices start at 1")
        src = self.exact if self.exact is not None else self.bids
        return src[j - 1] if j <= len(src) else 0

    def scaled(self, c: float) -> "BidVector":
        if c <= 0:
            raise ValueError("scale must be positive")
        exact = None
        if self.exact is not None and isinstance(c, (int, Fraction)):
            exact = tuple(x * c for x in self.exact)
        return BidVector(tuple(b * c for b in self.bids), exact)


@dataclass(frozen=True)
class Partition:
    """Side marker ('A' or 'B') for each index 1..n."""

    membership: tuple
    first_in_B: bool = False

    def __post_init__(self):
        mem = tuple(self.membership)
        if any(s not in ("A", "B") for s in mem):
            raise ValueError("membership entries must be 'A' or 'B'")
        if self.first_in_B and mem and mem[0] != "B":
            raise ValueError("first_in_B requires index 1 on side B")
        object.__setattr__(self, "membership", mem)

    @classmethod
    def from_sets(cls, n: int, A: Iterable[int], first_in_B: bool = False) -> "Partition":
        a = set(A)
        if any(j < 1 or j > n for j in a):
            raise ValueError("side A holds an index outside 1..n")
        return cls(tuple("A" if j in a else "B" for j in range(1, n + 1)), first_in_B)

    @classmethod
    def from_mask(cls, n: int, mask: int, first_in_B: bool = False) -> "Partition":
        """Bit j-1 of ``mask`` set means index j is on side A."""
        return cls(tuple("A" if mask >> (j - 1) & 1 else "B" for j in range(1, n + 1)), first_in_B)

    @property
    def n(self) -> int:
        return len(self.membership)

    @property
    def A(self) -> frozenset:
        return frozenset(j for j, s in enumerate(self.membership, 1) if s == "A")

    @property
    def B(self) -> frozenset:
        return frozenset(j for j, s in enumerate(self.membership, 1) if s == "B")


@dataclass(frozen=True)
class OptResult:
    opt_value: float
    lam: int
    maximizer_set: frozenset


@dataclass(frozen=True)
class RevenueBreakdown:
    price_to_A: float
    price_to_B: float
    revenue_from_A: float
    revenue_from_B: float

    @property
    def total(self):
        return self.revenue_from_A + self.revenue_from_B


_ZERO = RevenueBreakdown(0, 0, 0, 0)


def _tied(x, y) -> bool:
    if isinstance(x, Fraction) and isinstance(y, Fraction):
        return x == y
    return math.isclose(x, y, rel_tol=REL_TIE_TOL, abs_tol=0.0) or x == y


def opt_revenue(v: BidVector, rule: str = "largest") -> OptResult:
    """max_{j>=2} j*v_j with lambda chosen as the largest (or smallest) maximiser."""
    if rule not in ("largest", "smallest"):
        raise ValueError("rule must be 'largest' or 'smallest'")
    top = max(v.n, 2)
    revs = [(j, j * v.value(j)) for j in range(2, top + 1)]
    best = max(r for _, r in revs)
    if best == 0:
        return OptResult(0.0, 2, frozenset(j for j, _ in revs))
    winners = frozenset(j for j, r in revs if _tied(r, best))
    lam = max(winners) if rule == "largest" else min(winners)
    return OptResult(float(lam * v.value(lam)), lam, winners)


def _sales(v: BidVector, members: Sequence[int], price) -> int:
    return sum(1 for i in members if v.value(i) >= price)


def optimal_price_index(v: BidVector, side: Iterable[int], tie=TiePolicy.LOWEST_PRICE,
                        opposite: Iterable[int] | None = None) -> int | None:
    """Index whose bid is the revenue-optimal price for ``side``.

    Among tied prices, ``lowest_price`` sells to the most bidders,
    ``highest_price`` to the fewest, and ``adversarial_min`` picks the price
    that earns least from ``opposite`` (lowest price on a further tie).  The
    returned index is the last side member holding the chosen bid.
    """
    tie = TiePolicy.of(tie)
    members = sorted(j for j in side if v.value(j) > 0)
    if not members:
        return None
    revenue = {j: _sales(v, members, v.value(j)) * v.value(j) for j in members}
    best = max(revenue.values())
    cands = [j for j in members if _tied(revenue[j], best)]
    if tie is TiePolicy.HIGHEST_PRICE:
        price = v.value(cands[0])
    elif tie is TiePolicy.LOWEST_PRICE:
        price = v.value(cands[-1])
    else:
        if opposite is None:
            raise ValueError("adversarial_min needs the opposite side")
        opp = [j for j in opposite if v.value(j) > 0]
        price = min((_sales(v, opp, v.value(j)) * v.value(j), v.value(j)) for j in cands)[1]
    return max(j for j in members if v.value(j) == price)


def _split(v: BidVector, p: Partition):
    if p.n < v.n_positive:
        raise ValueError("partition does not cover every positive bid")
    a = [j for j in sorted(p.A) if v.value(j) > 0]
    b = [j for j in sorted(p.B) if v.value(j) > 0]
    return a, b


def rsop_revenue(v: BidVector, p: Partition, tie=TiePolicy.LOWEST_PRICE) -> RevenueBreakdown:
    """Each side's optimal price is offered to the other side."""
    a, b = _split(v, p)
    if not a or not b:
        return _ZERO
    ia = optimal_price_index(v, a, tie, opposite=b)
    ib = optimal_price_index(v, b, tie, opposite=a)
    to_b, to_a = v.value(ia), v.value(ib)
    return RevenueBreakdown(to_a, to_b, _sales(v, a, to_a) * to_a, _sales(v, b, to_b) * to_b)


def rsop_star_revenue(v: BidVector, p: Partition, tie=TiePolicy.LOWEST_PRICE) -> RevenueBreakdown:
    """As RSOP, but a lone occupied side is offered its lowest positive bid."""
    a, b = _split(v, p)
    if a and b:
        return rsop_revenue(v, p, tie)
    if b:
        price = v.value(b[-1])
        return RevenueBreakdown(0, price, 0, len(b) * price)
    if a:
        price = v.value(a[-1])
        return RevenueBreakdown(price, 0, len(a) * price, 0)
    return _ZERO


def make_equal_revenue(n: int) -> BidVector:
    """(1, 1/2, ..., 1/n), carrying exact rationals for tie detection."""
    if n < 1:
        raise ValueError("n must be positive")
    exact = tuple(Fraction(1, j) for j in range(1, n + 1))
    return BidVector(tuple(1.0 / j for j in range(1, n + 1)), exact)


def make_two_value(k: int, h: int) -> BidVector:
    """k bids of value h followed by k(h-1) bids of value 1."""
    if k < 1 or h < 2:
        raise ValueError("two-value instances need k >= 1 and h >= 2")
    vals = (h,) * k + (1,) * (k * (h - 1))
    return BidVector(vals, tuple(Fraction(x) for x in vals))


def load_bids(path) -> BidVector:
    """Read one decimal bid per line; blank lines and '#' comments are skipped."""
    vals = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            vals.append(Fraction(line))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: not a decimal number: {line!r}") from None
    if any(x < 0 for x in vals):
        raise ValueError(f"{path}: bids must be non-negative")
    return BidVector.from_values(vals)


def parse_generator(spec: str) -> BidVector:
    """'equal-revenue:n' or 'two-value:k,h'."""
    name, _, arg = spec.partition(":")
    try:
        if name == "equal-revenue":
            return make_equal_revenue(int(arg))
        if name == "two-value":
            k, h = (int(x) for x in arg.split(","))
            return make_two_value(k, h)
    except ValueError as exc:
        raise ValueError(f"bad generator arguments in {spec!r}: {exc}") from None
    raise ValueError(f"unknown generator {spec!r}; use equal-revenue:n or two-value:k,h")
