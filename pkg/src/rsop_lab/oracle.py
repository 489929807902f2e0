"""Ground truth by exhaustive enumeration and by seeded Monte Carlo.

Both paths evaluate revenues in fixed-size chunks and combine chunk sums with
``math.fsum`` in chunk order, so the answer does not depend on how many
workers ran.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .core import REL_TIE_TOL, BidVector, TiePolicy

__all__ = [
    "ExpectationResult",
    "MAX_ENUM_BITS",
    "exact_expected_revenue",
    "monte_carlo_expected_revenue",
    "exact_event_probability",
    "membership_matrix",
]

MAX_ENUM_BITS = 25
CONFIDENCE = 0.99
_CHUNK = 1 << 16
_MC_BLOCK = 1 << 14
_TIE_CODE = {
    TiePolicy.LOWEST_PRICE: _kernels.TIE_LOWEST,
    TiePolicy.HIGHEST_PRICE: _kernels.TIE_HIGHEST,
    TiePolicy.ADVERSARIAL_MIN: _kernels.TIE_ADVERSARIAL,
}


@dataclass(frozen=True)
class ExpectationResult:
    value: float
    method: str
    samples: int = 0
    ci_halfwidth: float = 0.0
    seed: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def to_csv_row(self, header: bool = True) -> str:
        fields = ["value", "method", "samples", "ci_halfwidth", "seed"]
        row = [repr(self.value), self.method, str(self.samples), repr(self.ci_halfwidth), str(self.seed)]
        lines = ([",".join(fields)] if header else []) + [",".join(row)]
        return "\n".join(lines) + "\n"


def _positive_bids(v: BidVector) -> np.ndarray:
    return np.array([b for b in v.bids if b > 0.0], dtype=np.float64)


def _variant_flag(variant: str) -> bool:
    if variant not in ("rsop", "rsop_star"):
        raise ValueError("variant must be 'rsop' or 'rsop_star'")
    return variant == "rsop_star"


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def exact_expected_revenue(v: BidVector, variant: str = "rsop", tie=TiePolicy.LOWEST_PRICE,
                           convention: str = "free", workers: int = 1) -> ExpectationResult:
    """Average total revenue over every assignment of the positive bids.

    ``first_in_B`` enumerates only assignments with index 1 on side B; by the
    A/B symmetry the average is the same.
    """
    bids = _positive_bids(v)
    n = bids.shape[0]
    if n > MAX_ENUM_BITS:
        raise ValueError(f"{n} positive bids exceed the enumeration budget of 2^{MAX_ENUM_BITS}")
    star = _variant_flag(variant)
    code = _TIE_CODE[TiePolicy.of(tie)]
    if n == 0:
        return ExpectationResult(0.0, "exact")
    if convention == "free":
        count, step = 1 << n, 1
    elif convention == "first_in_B":
        count, step = 1 << (n - 1), 2
    else:
        raise ValueError("convention must be 'free' or 'first_in_B'")
    chunks = [(lo, min(lo + _CHUNK, count)) for lo in range(0, count, _CHUNK)]

    def run(c):
        return _kernels.revenue_sum_range(bids, c[0], c[1], step, 0, star, code, REL_TIE_TOL)

    total = math.fsum(_map(run, chunks, workers))
    return ExpectationResult(total / count, "exact")


def _block_rows(seed: int, block: int, size: int, n: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))
    return rng.integers(0, 2, size=(size, n), dtype=np.uint8).astype(np.bool_)


def monte_carlo_expected_revenue(v: BidVector, variant: str = "rsop", tie=TiePolicy.LOWEST_PRICE,
                                 samples: int = 100_000, seed: int = 0,
                                 workers: int = 1) -> ExpectationResult:
    """Seeded estimate with a 99% normal-approximation confidence half-width.

    Sample i belongs to block i // 2^14 and block b draws from a Philox stream
    keyed by (seed, b); the result is therefore a function of (seed, samples, v)
    alone.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    bids = _positive_bids(v)
    n = bids.shape[0]
    star = _variant_flag(variant)
    code = _TIE_CODE[TiePolicy.of(tie)]
    blocks = [(b, min(_MC_BLOCK, samples - b * _MC_BLOCK)) for b in range(-(-samples // _MC_BLOCK))]

    def run(blk):
        b, size = blk
        if n == 0:
            return 0.0, 0.0
        rev = _kernels.revenues_for_rows(bids, _block_rows(seed, b, size, n), star, code, REL_TIE_TOL)
        return math.fsum(rev), math.fsum(rev * rev)

    parts = _map(run, blocks, workers)
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    mean = s1 / samples
    var = max(0.0, (s2 - samples * mean * mean) / (samples - 1)) if samples > 1 else 0.0
    z = NormalDist().inv_cdf(0.5 + CONFIDENCE / 2)
    return ExpectationResult(mean, "monte_carlo", samples, z * math.sqrt(var / samples), seed)


def membership_matrix(n: int, lo: int, hi: int, convention: str = "first_in_B") -> np.ndarray:
    """Rows lo..hi-1 of the enumeration as an (rows, n) boolean 'in A' matrix."""
    idx = np.arange(lo, hi, dtype=np.int64)
    if convention == "first_in_B":
        idx = idx << 1
    bits = (idx[:, None] >> np.arange(n)) & 1
    return bits.astype(bool)


def exact_event_probability(n: int, predicates: Sequence[Callable], convention: str = "first_in_B"):
    """Exact P[each predicate] and P[all predicates] over assignments of 1..n.

    Each predicate takes a (rows, n) boolean membership matrix (column j-1 is
    index j, True meaning side A) and returns a boolean vector; ``EventSpec.holds``
    fits directly.
    """
    if n > MAX_ENUM_BITS:
        raise ValueError(f"n={n} exceeds the enumeration budget of 2^{MAX_ENUM_BITS}")
    if convention == "free":
        count = 1 << n
    elif convention == "first_in_B":
        count = 1 << max(n - 1, 0)
    else:
        raise ValueError("convention must be 'free' or 'first_in_B'")
    hits = [0] * len(predicates)
    joint = 0
    for lo in range(0, count, _CHUNK):
        m = membership_matrix(n, lo, min(lo + _CHUNK, count), convention)
        ok = np.ones(m.shape[0], dtype=bool)
        for i, pred in enumerate(predicates):
            r = np.asarray(pred(m), dtype=bool)
            hits[i] += int(r.sum())
            ok &= r
        joint += int(ok.sum())
    return {"marginals": [h / count for h in hits], "joint": joint / count}
