# coding: utf-8

# # An instance the auction cannot beat 2.65 on
#
# On equal-revenue bids the expected revenue has a closed route: sweep a
# threshold over the largest ratio S_j / j seen on each side, and read the
# expectation off the two maximum-ratio CDFs.

# In[1]:

from rsop_lab.core import make_equal_revenue
from rsop_lab.oracle import exact_expected_revenue
from rsop_lab.upper_bound import (
    monotonicity_audit,
    rsop_star_expectation_equal_revenue,
    upper_bound_certificate,
)


# First check the sweep against brute-force enumeration where that is cheap.

# In[2]:

for n in (4, 10, 18):
    sweep = rsop_star_expectation_equal_revenue(n)
    brute = exact_expected_revenue(make_equal_revenue(n), "rsop_star", convention="first_in_B").value
    print(n, sweep, abs(sweep - brute))


# The expectation only shrinks as n grows.

# In[3]:

rows = monotonicity_audit(40)
print([(r["n"], round(r["value"], 5)) for r in rows[::8]], any(r["violation"] for r in rows))


# At 400 bids the expected revenue is below OPT / 2.65.

# In[4]:

cert = upper_bound_certificate(2)
print(cert["rsop"], cert["ratio"], cert["certified"])
