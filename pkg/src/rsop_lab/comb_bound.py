"""Exact expectations on two-value equal-revenue instances.

The instance has k bids of value h and k(h-1) bids of value 1, so OPT = kh at
either price.  A random split is summarised by (a, b): the numbers of h-bids
and 1-bids on side A.  Everything is exact rational arithmetic.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from fractions import Fraction
from math import comb

from .core import TiePolicy

__all__ = [
    "TwoValueOutcome",
    "outcomes",
    "exact_two_value_expectation",
    "comb_bound_value",
    "CombRow",
    "verify_comb",
    "rows_to_csv",
]


@dataclass(frozen=True)
class TwoValueOutcome:
    k: int
    h: int
    a: int
    b: int
    weight: Fraction


def _check(k, h):
    if k < 1 or h < 2:
        raise ValueError("two-value instances need k >= 1 and h >= 2")


def outcomes(k: int, h: int):
    _check(k, h)
    units = k * (h - 1)
    denom = 2 ** (k * h)
    for a in range(k + 1):
        for b in range(units + 1):
            yield TwoValueOutcome(k, h, a, b, Fraction(comb(k, a) * comb(units, b), denom))


def _price(h, own_h, own_u, opp_h, opp_u, tie):
    """Price a side with own_h h-bids and own_u 1-bids offers the other side."""
    cands = []
    if own_h:
        cands.append((own_h * h, h))
    if own_u:
        cands.append((own_h + own_u, 1))
    best = max(r for r, _ in cands)
    prices = [p for r, p in cands if r == best]
    if tie is TiePolicy.HIGHEST_PRICE:
        return max(prices)
    if tie is TiePolicy.LOWEST_PRICE:
        return min(prices)
    return min(prices, key=lambda p: (_sold(h, opp_h, opp_u, p), p))


def _sold(h, cnt_h, cnt_u, price):
    return cnt_h * h if price == h else cnt_h + cnt_u


def _revenue(k, h, a, b, star, tie):
    ha, ua = a, b
    hb, ub = k - a, k * (h - 1) - b
    if ha + ua == 0 or hb + ub == 0:
        # the occupied side holds every bid; its lowest one is 1 and sells to all
        return k * h if star else 0
    to_b = _price(h, ha, ua, hb, ub, tie)
    to_a = _price(h, hb, ub, ha, ua, tie)
    return _sold(h, hb, ub, to_b) + _sold(h, ha, ua, to_a)


def exact_two_value_expectation(k: int, h: int, variant: str = "rsop",
                                tie=TiePolicy.LOWEST_PRICE) -> Fraction:
    if variant not in ("rsop", "rsop_star"):
        raise ValueError("variant must be 'rsop' or 'rsop_star'")
    tie = TiePolicy.of(tie)
    star = variant == "rsop_star"
    return sum((o.weight * _revenue(k, h, o.a, o.b, star, tie) for o in outcomes(k, h)), Fraction(0))


def comb_bound_value(k: int, h: int) -> Fraction:
    """(1/2 + 1/(2h) - 1/2^(kh-1)) * kh."""
    _check(k, h)
    return (Fraction(1, 2) + Fraction(1, 2 * h) - Fraction(1, 2 ** (k * h - 1))) * k * h


@dataclass(frozen=True)
class CombRow:
    k: int
    h: int
    exact_rsop: Fraction
    exact_rsop_star: Fraction
    bound: Fraction

    @property
    def slack(self) -> Fraction:
        return self.exact_rsop - self.bound

    @property
    def star_floor(self) -> Fraction:
        return Fraction(self.k * (self.h + 1), 2)

    @property
    def ok(self) -> bool:
        gap = Fraction(self.k * self.h, 2 ** (self.k * self.h - 1))
        return (self.slack >= 0 and self.exact_rsop_star >= self.star_floor
                and self.exact_rsop_star - self.exact_rsop == gap)


def verify_comb(k_max: int, h_max: int) -> list[CombRow]:
    if k_max < 1 or h_max < 2:
        raise ValueError(f"need k_max >= 1 and h_max >= 2, got {k_max}, {h_max}")
    rows = []
    for k in range(1, k_max + 1):
        for h in range(2, h_max + 1):
            rows.append(CombRow(k, h,
                                exact_two_value_expectation(k, h, "rsop"),
                                exact_two_value_expectation(k, h, "rsop_star"),
                                comb_bound_value(k, h)))
    return rows


def rows_to_csv(rows, extra: dict | None = None) -> str:
    buf = io.StringIO()
    meta = dict(extra or {})
    buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    buf.write("k,h,exact_rsop,exact_rsop_star,bound,slack,ok\n")
    for r in rows:
        buf.write(f"{r.k},{r.h},{float(r.exact_rsop):.6f},{float(r.exact_rsop_star):.6f},"
                  f"{float(r.bound):.6f},{float(r.slack):.6f},{int(r.ok)}\n")
    return buf.getvalue()
