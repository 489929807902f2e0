"""Exact oracles and certified bounds for the random sampling optimal price auction."""

from .core import (
    BidVector,
    OptResult,
    Partition,
    RevenueBreakdown,
    TiePolicy,
    make_equal_revenue,
    make_two_value,
    opt_revenue,
    optimal_price_index,
    rsop_revenue,
    rsop_star_revenue,
)
from .prob_engine import Threshold

__version__ = "0.1.0"
