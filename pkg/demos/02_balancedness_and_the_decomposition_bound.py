# coding: utf-8

# # How lopsided does a random split get?
#
# Walk down the sorted bids and count how many of the top j landed on side A.
# Call that S_j. The auction does well whenever no prefix is too lopsided, so
# everything hinges on P[S_j <= alpha * j for all j].

# In[1]:

from fractions import Fraction

import numpy as np

from rsop_lab.basic_bound import GridParams, basic_bounds, expected_z_lower, expected_z_upper
from rsop_lab.prob_engine import event_prob_table, rate_alpha, tail_probability_lower


# A lattice-path DP gives that probability exactly for the first ell bids.

# In[2]:

for alpha in (Fraction(3, 5), Fraction(3, 4), Fraction(9, 10)):
    print(alpha, event_prob_table(alpha, 200).probability)


# Past ell the DP is replaced by a geometric tail built from the Chernoff rate.
# The rate falls below 1 as soon as alpha leaves 1/2, so the tail closes quickly.

# In[3]:

[(a, round(rate_alpha(Fraction(a, 100)), 5)) for a in (51, 60, 75, 90)]


# In[4]:

tail_probability_lower(Fraction(3, 4), 200, 100_000).value


# # The decomposition bound
#
# Slice alpha into a grid, weight each slice by how much it moves the
# balancedness statistic Z, and add up. The result is a certified lower bound
# on E[RSOP]/OPT for each lambda, the number of winners in OPT.

# In[5]:

g = GridParams.uniform(40, 1000, 100_000)
reports = basic_bounds([2, 3, 5, 10, 50, 200], g)
for r in reports:
    print(r.lam, f"{r.bound:.4f}", f"ratio {r.competitive_ratio:.3f}")


# The same grid brackets E[Z] itself. The lower end is what the large-lambda
# argument needs.

# In[6]:

lo, hi = expected_z_lower(g), expected_z_upper(g)
print(lo, hi)
np.all(lo <= hi)
