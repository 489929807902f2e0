# coding: utf-8

# # Tightening the bound by searching over bid shapes
#
# For small lambda the decomposition bound is loose because it ignores what the
# top few bids look like. Here we cut the range of each of the top d bids into
# theta slices, bound the auction inside every box, and keep the worst box.

# In[1]:

from rsop_lab.basic_bound import GridParams, ez_decomposition_bound
from rsop_lab.xsearch_bound import XSearchParams, enumerate_configs, xsearch_bound


# How many boxes survive once impossible shapes are pruned?

# In[2]:

raw = 2 ** 4 * 20
kept = sum(1 for _ in enumerate_configs(5, 2, 20, 2))
raw, kept


# The search beats the plain decomposition on the same alpha grid.

# In[3]:

g = GridParams.uniform(20, 2000, 100_000)
for lam in (2, 3, 4):
    box = xsearch_bound(XSearchParams(lam, d=5, theta=2, m_prime=20, grid=g))
    plain = ez_decomposition_bound(lam, g)
    print(lam, f"{plain.bound:.4f}", f"{box.bound:.4f}", box.components["argmin"])
