"""Compiled inner loops.

Everything here works on plain numpy arrays and integers so that the public
modules stay readable.  Thresholds arrive as (num, den) pairs and feasibility
``k <= alpha * j`` is always decided as ``k * den <= j * num``.
"""

import numpy as np
from numba import njit

TIE_LOWEST = 0
TIE_HIGHEST = 1
TIE_ADVERSARIAL = 2


# ---------------------------------------------------------------------------
# partition revenues
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _side_price(bids, members, cnt, other, ocnt, tie, rtol):
    """Return the chosen optimal price of ``members`` (0.0 if none)."""
    if cnt == 0:
        return 0.0
    best = -1.0
    i = 0
    while i < cnt:
        p = bids[members[i]]
        while i + 1 < cnt and bids[members[i + 1]] == p:
            i += 1
        r = (i + 1) * p
        if r > best:
            best = r
        i += 1
    floor = best - rtol * best
    chosen = 0.0
    chosen_opp = np.inf
    i = 0
    while i < cnt:
        p = bids[members[i]]
        while i + 1 < cnt and bids[members[i + 1]] == p:
            i += 1
        r = (i + 1) * p
        if r >= floor:
            if tie == TIE_HIGHEST:
                if chosen == 0.0:
                    chosen = p
            elif tie == TIE_LOWEST:
                chosen = p
            else:
                c = 0
                for t in range(ocnt):
                    if bids[other[t]] >= p:
                        c += 1
                opp = c * p
                # later candidates are lower prices; prefer them on equal loss
                if opp <= chosen_opp:
                    chosen_opp = opp
                    chosen = p
        i += 1
    return chosen


@njit(cache=True, nogil=True)
def _revenue_sides(bids, amem, ca, bmem, cb, star, tie, rtol):
    if ca == 0 or cb == 0:
        if not star or (ca == 0 and cb == 0):
            return 0.0
        # lowest non-zero bid offered to the only occupied side
        if ca == 0:
            return cb * bids[bmem[cb - 1]]
        return ca * bids[amem[ca - 1]]
    pa = _side_price(bids, amem, ca, bmem, cb, tie, rtol)
    pb = _side_price(bids, bmem, cb, amem, ca, tie, rtol)
    total = 0.0
    c = 0
    for t in range(cb):
        if bids[bmem[t]] >= pa:
            c += 1
    total += c * pa
    c = 0
    for t in range(ca):
        if bids[amem[t]] >= pb:
            c += 1
    total += c * pb
    return total


@njit(cache=True, nogil=True)
def _revenue_one(bids, n, mask, star, tie, rtol, amem, bmem):
    ca = 0
    cb = 0
    for j in range(n):
        if bids[j] <= 0.0:
            continue
        if (mask >> np.uint64(j)) & np.uint64(1):
            amem[ca] = j
            ca += 1
        else:
            bmem[cb] = j
            cb += 1
    return _revenue_sides(bids, amem, ca, bmem, cb, star, tie, rtol)


@njit(cache=True, nogil=True)
def revenues_for_rows(bids, rows, star, tie, rtol):
    """Revenue per row of a (samples, n) boolean 'index on side A' matrix."""
    n = bids.shape[0]
    out = np.empty(rows.shape[0])
    amem = np.empty(n, np.int64)
    bmem = np.empty(n, np.int64)
    for i in range(rows.shape[0]):
        ca = 0
        cb = 0
        for j in range(n):
            if bids[j] <= 0.0:
                continue
            if rows[i, j]:
                amem[ca] = j
                ca += 1
            else:
                bmem[cb] = j
                cb += 1
        out[i] = _revenue_sides(bids, amem, ca, bmem, cb, star, tie, rtol)
    return out


@njit(cache=True, nogil=True)
def revenues_for_masks(bids, masks, star, tie, rtol):
    n = bids.shape[0]
    out = np.empty(masks.shape[0])
    amem = np.empty(n, np.int64)
    bmem = np.empty(n, np.int64)
    for i in range(masks.shape[0]):
        out[i] = _revenue_one(bids, n, masks[i], star, tie, rtol, amem, bmem)
    return out


@njit(cache=True, nogil=True)
def revenue_sum_range(bids, lo, hi, step, offset, star, tie, rtol):
    """Compensated sum of revenues over masks ``offset + step*i``, lo <= i < hi."""
    n = bids.shape[0]
    amem = np.empty(n, np.int64)
    bmem = np.empty(n, np.int64)
    s = 0.0
    comp = 0.0
    for i in range(lo, hi):
        mask = np.uint64(offset + step * i)
        x = _revenue_one(bids, n, mask, star, tie, rtol, amem, bmem)
        t = s + x
        if abs(s) >= abs(x):
            comp += (s - t) + x
        else:
            comp += (x - t) + s
        s = t
    return s + comp


# ---------------------------------------------------------------------------
# balancedness DPs
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def forward_table(num, den, ell, d, a, check_start):
    """P[S_ell = k and S_j <= alpha*j for d < j <= ell | S_d = a]."""
    f = np.zeros(ell + 2)
    if check_start and a * den > d * num:
        return f[: ell + 1]
    f[a] = 1.0
    hi = a
    for j in range(d + 1, ell + 1):
        km = (j * num) // den
        top = min(hi + 1, km)
        for k in range(top, 0, -1):
            f[k] = 0.5 * (f[k] + f[k - 1])
        f[0] *= 0.5
        for k in range(top + 1, hi + 2):
            f[k] = 0.0
        hi = max(top, 0)
    return f[: ell + 1]


@njit(cache=True, nogil=True)
def forward_aggregate(num, den, ell):
    """P[E_alpha^{[1..ell]}] with index 1 in B, skipping underflowed zeros.

    Entries below ``lo`` are exact zeros and stay zero, so skipping them
    changes no bit of the result.
    """
    f = np.zeros(ell + 2)
    f[0] = 1.0
    lo = 0
    hi = 0
    for j in range(2, ell + 1):
        km = (j * num) // den
        top = min(hi + 1, km)
        for k in range(top, max(lo, 1) - 1, -1):
            f[k] = 0.5 * (f[k] + f[k - 1])
        if lo == 0:
            f[0] *= 0.5
        for k in range(top + 1, hi + 2):
            f[k] = 0.0
        hi = top
        while lo < hi and f[lo] == 0.0:
            lo += 1
    s = 0.0
    comp = 0.0
    for k in range(lo, hi + 1):
        x = f[k]
        t = s + x
        comp += (s - t) + x
        s = t
    return s + comp


@njit(cache=True, nogil=True)
def backward_rows(num, den, ell, d, rows_at, terminal):
    """Survival g_j(k) = E[terminal(S_ell); S_i <= alpha*i for j <= i <= ell | S_j = k].

    ``terminal`` weights the end states (all ones gives plain probabilities).
    Returns a dense (len(rows_at), ell+1) array holding g_j for each requested
    j (ascending, all with d < j <= ell).  Row j includes the constraint at j.
    """
    nr = rows_at.shape[0]
    out = np.zeros((nr, ell + 1))
    g = np.zeros(ell + 2)
    km = (ell * num) // den
    for k in range(min(km, ell) + 1):
        g[k] = terminal[k]
    ptr = nr - 1
    for j in range(ell, d, -1):
        while ptr >= 0 and rows_at[ptr] == j:
            out[ptr, : j + 1] = g[: j + 1]
            ptr -= 1
        if j - 1 <= d:
            break
        # step to j-1: g_{j-1}(k) = 1{k feasible at j-1} * (g_j(k) + g_j(k+1)) / 2
        kmp = ((j - 1) * num) // den
        for k in range(0, j):
            if k <= kmp:
                g[k] = 0.5 * (g[k] + g[k + 1])
            else:
                g[k] = 0.0
        g[j] = 0.0
    return out


@njit(cache=True, nogil=True)
def cell_expectations(num, den, ell, lams):
    """Aggregate P[E^{[1..ell]}] and E_n[S_lam/lam | E^{[1..ell]}] for each lam.

    ``lams`` must be sorted ascending with 2 <= lam <= ell.  Forward masses
    f_lam and backward survivals g_lam meet at lam; the product is the joint
    law of S_lam on the event.
    """
    g_rows = backward_rows(num, den, ell, 1, lams, np.ones(ell + 1))
    out = np.zeros(lams.shape[0])
    f = np.zeros(ell + 2)
    f[0] = 1.0
    ptr = 0
    hi = 0
    for j in range(2, ell + 1):
        km = (j * num) // den
        top = min(hi + 1, km)
        for k in range(top, 0, -1):
            f[k] = 0.5 * (f[k] + f[k - 1])
        f[0] *= 0.5
        for k in range(top + 1, hi + 2):
            f[k] = 0.0
        hi = top
        while ptr < lams.shape[0] and lams[ptr] == j:
            acc = 0.0
            for k in range(hi + 1):
                acc += k * f[k] * g_rows[ptr, k]
            out[ptr] = acc / j
            ptr += 1
    total = 0.0
    for k in range(hi + 1):
        total += f[k]
    return total, out


# ---------------------------------------------------------------------------
# side-maximum CDFs on equal-revenue instances
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _side_cdf_one(p, q, n, side_is_a, first_in_b, f):
    """P[every index j <= n on the side has ratio_j <= p/q].

    State k counts side members among the first j indices; the ratio of a
    member j is k/j, so the constraint binds only on the branch where j joins
    the side.  With ``first_in_b`` index 1 is pinned (to B).
    """
    for k in range(n + 2):
        f[k] = 0.0
    f[0] = 1.0
    start = 1
    if first_in_b:
        if side_is_a:
            f[0] = 1.0
        else:
            # index 1 joins side B with ratio 1/1
            if q <= p:
                f[0] = 0.0
                f[1] = 1.0
            else:
                return 0.0
        start = 2
    for j in range(start, n + 1):
        for k in range(j, 0, -1):
            join = f[k - 1] if k * q <= j * p else 0.0
            f[k] = 0.5 * f[k] + 0.5 * join
        f[0] *= 0.5
    s = 0.0
    for k in range(n + 1):
        s += f[k]
    return s


@njit(cache=True, nogil=True)
def side_cdf_many(ps, qs, n, side_is_a, first_in_b):
    out = np.empty(ps.shape[0])
    f = np.empty(n + 2)
    for i in range(ps.shape[0]):
        out[i] = _side_cdf_one(ps[i], qs[i], n, side_is_a, first_in_b, f)
    return out


@njit(cache=True, nogil=True)
def _rate(b):
    lb = b * np.log(b) if b > 0.0 else 0.0
    lc = (1.0 - b) * np.log1p(-b) if b < 1.0 else 0.0
    return 0.5 * np.exp(-(lb + lc))


@njit(cache=True, nogil=True)
def tail_weights(num, den, ell, ell_prime, log_r_alpha, log_rest):
    """Per-state tail survival bounds; see prob_engine.terminal_tail_weights."""
    h = np.zeros(ell + 1)
    kmax = min((ell * num) // den, ell)
    alpha = num / den
    for k in range(kmax, -1, -1):
        acc = log_rest
        ok = True
        for j in range(ell + 1, ell_prime + 1):
            steps = j - ell
            b = (num * j - k * den) / (den * steps) - 1e-12
            if b >= 1.0:
                continue
            if b <= 0.5:
                ok = False
                break
            lp = steps * np.log(_rate(b))
            if lp >= 0.0:
                ok = False
                break
            acc += np.log1p(-np.exp(lp))
            # every later term is at most r_alpha^steps; stop once they vanish
            if steps * log_r_alpha < -50.0 and lp < -50.0:
                tail_bound = np.exp(steps * log_r_alpha) / (1.0 - np.exp(log_r_alpha))
                acc -= 2.0 * tail_bound
                break
        if not ok:
            continue
        h[k] = np.exp(acc)
        if h[k] == 1.0:
            for q in range(k):
                h[q] = 1.0
            break
    return h


@njit(cache=True, nogil=True)
def xsearch_table(num, den, ell, d, lp_lo, lp_hi, terminal, m_prime, a_max, cp_lo, cp_hi):
    """Minimum over lambda' in [lp_lo, lp_hi] of

        sum_k max(ci/m', (k/lambda') cpi/m') P[S_lambda' = k, E | S_d = a],

    where E constrains indices d+1..ell and the end state is weighted by
    ``terminal``.  Returns (table[a, ci, cpi], p_event[a]); p_event is the
    weighted probability of E itself.  Only cpi in [cp_lo, cp_hi] are filled.
    """
    nrow = lp_hi - d
    rows = np.arange(d + 1, lp_hi + 1)
    g = backward_rows(num, den, ell, d, rows, terminal)
    table = np.full((a_max + 1, m_prime + 1, m_prime + 1), np.inf)
    p_event = np.zeros(a_max + 1)
    wk = np.zeros(lp_hi + 2)
    cw = np.zeros(lp_hi + 2)
    ckw = np.zeros(lp_hi + 2)
    for a in range(a_max + 1):
        f = np.zeros(ell + 2)
        f[a] = 1.0
        hi = a
        for j in range(d + 1, lp_hi + 1):
            km = (j * num) // den
            top = min(hi + 1, km)
            for k in range(top, 0, -1):
                f[k] = 0.5 * (f[k] + f[k - 1])
            f[0] *= 0.5
            for k in range(top + 1, hi + 2):
                f[k] = 0.0
            hi = max(top, 0)
            r = j - d - 1
            if j == d + 1:
                s = 0.0
                for k in range(hi + 1):
                    s += f[k] * g[r, k]
                p_event[a] = s
            if j < lp_lo:
                continue
            # prefix sums of the joint law and of k times it
            acc = 0.0
            acck = 0.0
            for k in range(j + 1):
                x = f[k] * g[r, k] if k <= hi else 0.0
                wk[k] = x
                cw[k] = acc
                ckw[k] = acck
                acc += x
                acck += k * x
            cw[j + 1] = acc
            ckw[j + 1] = acck
            for ci in range(m_prime + 1):
                for cpi in range(cp_lo, cp_hi + 1):
                    if cpi == 0:
                        ks = j + 1
                    else:
                        ks = (ci * j + cpi - 1) // cpi
                        if ks > j + 1:
                            ks = j + 1
                    v = (ci * cw[ks] + cpi * (ckw[j + 1] - ckw[ks]) / j) / m_prime
                    if v < table[a, ci, cpi]:
                        table[a, ci, cpi] = v
    return table, p_event
