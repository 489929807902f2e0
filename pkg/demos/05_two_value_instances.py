# coding: utf-8

# # k bids of value h, and k(h-1) bids of value 1
#
# Both prices earn kh, so OPT = kh. A split only matters through how many of
# each kind land on side A, which makes the expectation an exact finite sum.

# In[1]:

from fractions import Fraction

from rsop_lab.comb_bound import comb_bound_value, exact_two_value_expectation, verify_comb


# The smallest case is tight: one bid of 2 and one of 1 gives OPT / 4.

# In[2]:

exact_two_value_expectation(1, 2), comb_bound_value(1, 2)


# Over a grid the closed form never overshoots.

# In[3]:

rows = verify_comb(5, 5)
all(r.ok for r in rows), min(r.slack for r in rows)


# More bids of value h lift the ratio well past 1/2 + 1/(2h), the limit of the
# closed form. The closed form is a floor, not an estimate.

# In[4]:

for k in (1, 2, 4, 6):
    r = exact_two_value_expectation(k, 3)
    print(k, float(r / (3 * k)), float(Fraction(1, 2) + Fraction(1, 6)))
