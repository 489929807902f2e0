# coding: utf-8

# # Random sampling optimal price, by hand
#
# Split the bids into two random halves. Each half computes the single price
# that would earn it the most, and that price is offered to the *other* half.
# Nobody's bid affects the price they face, which is what makes it truthful.

# In[1]:

import numpy as np

from rsop_lab.core import BidVector, Partition, make_equal_revenue, opt_revenue, rsop_revenue
from rsop_lab.oracle import exact_expected_revenue, monte_carlo_expected_revenue


# Start with two bids. OPT sells to both at price 1/2.

# In[2]:

v = BidVector((1.0, 0.5))
opt_revenue(v)


# There are four ways to split two bids. Only the two "one on each side"
# splits sell anything, and each sells one item at the other side's price.

# In[3]:

for mask in range(4):
    p = Partition.from_mask(2, mask)
    print(mask, rsop_revenue(v, p).total)


# Averaging over all splits gives 1/4, a quarter of OPT.

# In[4]:

exact_expected_revenue(v, "rsop").value


# # Equal-revenue bids
#
# Bids 1, 1/2, ..., 1/n make every price earn exactly 1. This is the hard
# family for the auction.

# In[5]:

for n in (2, 5, 10, 16):
    r = exact_expected_revenue(make_equal_revenue(n), "rsop").value
    print(n, round(r, 6), round(1 / r, 4))


# Full enumeration stops being an option around n = 30, so sample instead.
# The seed fixes the stream and the answer does not depend on worker count.

# In[6]:

mc = monte_carlo_expected_revenue(make_equal_revenue(60), samples=200_000, seed=1)
print(mc.value, "+/-", mc.ci_halfwidth)

np.isclose(mc.value, monte_carlo_expected_revenue(make_equal_revenue(60), samples=200_000,
                                                  seed=1, workers=4).value)
