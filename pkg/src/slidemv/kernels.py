"""Hot numeric kernels.

Every kernel here is written in the subset of numpy that numba's nopython
mode understands, so the same source runs jitted or as plain numpy
(see :mod:`slidemv._accel`).  The window-moment kernel additionally has a
vectorised numpy twin, used when the JIT is disabled.
"""
import math

import numpy as np

from ._accel import JIT_ENABLED, jit

# solver status codes shared with qp.py / strategy.py
OPTIMAL = 0
INFEASIBLE = 1
ITERATION_CAP = 2
SINGULAR = 3
NON_FINITE = 4

# per-day decision codes
TRADED = 0
SKIPPED_INDEX_DOWN = 1
SKIPPED_INFEASIBLE = 2


# ----------------------------------------------------------------------------
# window moments
# ----------------------------------------------------------------------------

@jit
def window_moments_loop(x, w):
    """Weighted mean and population covariance of the rows of ``x``.

    ``x`` is (n, d) ordered oldest to newest, ``w`` the n weights (sum 1).
    """
    n, d = x.shape
    mean = np.zeros(d)
    for t in range(n):
        wt = w[t]
        for j in range(d):
            mean[j] += wt * x[t, j]
    cov = np.zeros((d, d))
    for t in range(n):
        wt = w[t]
        for j in range(d):
            dj = x[t, j] - mean[j]
            for k in range(j, d):
                cov[j, k] += wt * dj * (x[t, k] - mean[k])
    for j in range(d):
        for k in range(j + 1, d):
            cov[k, j] = cov[j, k]
    return mean, cov


def window_moments_numpy(x, w):
    mean = w @ x
    xc = x - mean
    cov = (xc * w[:, None]).T @ xc
    upper = np.triu(cov)
    cov = upper + np.triu(upper, 1).T
    return mean, cov


window_moments = window_moments_loop if JIT_ENABLED else window_moments_numpy


# ----------------------------------------------------------------------------
# dense linear algebra (in-tree so results do not depend on the LAPACK build)
# ----------------------------------------------------------------------------

@jit
def cholesky_psd(a, tol):
    """Lower Cholesky factor of a symmetric PSD matrix.

    Pivots at or below ``tol`` times the largest diagonal are treated as exact
    zeros (that column of the factor is zeroed).  Returns ``(L, ok)``; ``ok``
    is False when a pivot is clearly negative, i.e. the input is not PSD.
    """
    d = a.shape[0]
    L = np.zeros((d, d))
    scale = 0.0
    for i in range(d):
        if a[i, i] > scale:
            scale = a[i, i]
    thresh = tol * scale
    for j in range(d):
        s = a[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if s < -thresh or not np.isfinite(s):
            return L, False
        if s <= thresh:
            # zero pivot: the rest of the column must vanish too
            for i in range(j + 1, d):
                t = a[i, j]
                for k in range(j):
                    t -= L[i, k] * L[j, k]
                if abs(t) > np.sqrt(tol) * scale:
                    return L, False
            continue
        ljj = np.sqrt(s)
        L[j, j] = ljj
        for i in range(j + 1, d):
            t = a[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / ljj
    return L, True


@jit
def _cholesky_pd(a, rel_tol):
    d = a.shape[0]
    L = np.zeros((d, d))
    scale = 0.0
    for i in range(d):
        scale = max(scale, abs(a[i, i]))
    for j in range(d):
        s = a[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > rel_tol * scale:
            return L, False
        ljj = np.sqrt(s)
        L[j, j] = ljj
        for i in range(j + 1, d):
            t = a[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / ljj
    return L, True


@jit
def _cholesky_solve(L, b):
    d = L.shape[0]
    y = np.empty(d)
    for i in range(d):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * y[k]
        y[i] = s / L[i, i]
    x = np.empty(d)
    for i in range(d - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, d):
            s -= L[k, i] * x[k]
        x[i] = s / L[i, i]
    return x


@jit
def lu_full_pivot_solve(a, b, rel_tol):
    """Solve ``a x = b`` by Gaussian elimination with complete pivoting.

    Returns ``(x, ok)``; ``ok`` is False when a pivot falls below
    ``rel_tol * max|a|``.
    """
    n = a.shape[0]
    m = a.copy()
    rhs = b.copy()
    cols = np.arange(n)
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale = max(scale, abs(m[i, j]))
    x = np.zeros(n)
    if scale == 0.0:
        return x, False
    for k in range(n):
        pi = k
        pj = k
        best = -1.0
        for i in range(k, n):
            for j in range(k, n):
                v = abs(m[i, j])
                if v > best:
                    best = v
                    pi = i
                    pj = j
        if best <= rel_tol * scale:
            return x, False
        if pi != k:
            for j in range(n):
                tmp = m[k, j]
                m[k, j] = m[pi, j]
                m[pi, j] = tmp
            tmp = rhs[k]
            rhs[k] = rhs[pi]
            rhs[pi] = tmp
        if pj != k:
            for i in range(n):
                tmp = m[i, k]
                m[i, k] = m[i, pj]
                m[i, pj] = tmp
            c = cols[k]
            cols[k] = cols[pj]
            cols[pj] = c
        piv = m[k, k]
        for i in range(k + 1, n):
            f = m[i, k] / piv
            if f != 0.0:
                for j in range(k, n):
                    m[i, j] -= f * m[k, j]
                rhs[i] -= f * rhs[k]
    y = np.zeros(n)
    for i in range(n - 1, -1, -1):
        s = rhs[i]
        for j in range(i + 1, n):
            s -= m[i, j] * y[j]
        y[i] = s / m[i, i]
    for i in range(n):
        x[cols[i]] = y[i]
    return x, True


# ----------------------------------------------------------------------------
# active-set QP on the simplex with a return floor
# ----------------------------------------------------------------------------

@jit
def _solve_eqp(H, R, R0, fixed, ret_in):
    """Minimiser of 1/2 w'Hw on the current working set.

    Variables flagged in ``fixed`` are pinned to zero; the budget row is
    always an equality, the return row only when ``ret_in``.  Returns
    ``(w, mu, lam, ok)`` with ``H_FF w_F = mu * 1 + lam * R_F``.
    """
    d = R.shape[0]
    nf = 0
    for i in range(d):
        if not fixed[i]:
            nf += 1
    free = np.empty(nf, dtype=np.int64)
    c = 0
    for i in range(d):
        if not fixed[i]:
            free[c] = i
            c += 1
    Hf = np.empty((nf, nf))
    for a in range(nf):
        for b in range(nf):
            Hf[a, b] = H[free[a], free[b]]
    # the floor row is used as (R - R0)/scale . w = 0: same constraint set, but
    # far better conditioned against the budget row when returns are small
    scale = 0.0
    if ret_in:
        for a in range(nf):
            scale = max(scale, abs(R[free[a]] - R0))
    # every free asset returning exactly R0: the floor is implied by the budget
    use_floor = ret_in and scale > 0.0
    nc = 2 if use_floor else 1
    A = np.empty((nf, nc))
    for a in range(nf):
        A[a, 0] = 1.0
        if use_floor:
            A[a, 1] = (R[free[a]] - R0) / scale
    rhs = np.zeros(nc)
    rhs[0] = 1.0

    w = np.zeros(d)
    nu = np.zeros(2)
    solved = False

    # symmetric route: Cholesky of H_FF, then the small Schur complement
    L, ok = _cholesky_pd(Hf, 1e-14)
    if ok:
        Y = np.empty((nf, nc))
        for col in range(nc):
            Y[:, col] = _cholesky_solve(L, A[:, col].copy())
        S = np.zeros((nc, nc))
        for r in range(nc):
            for col in range(nc):
                s = 0.0
                for a in range(nf):
                    s += A[a, r] * Y[a, col]
                S[r, col] = s
        if nc == 1:
            if S[0, 0] > 0.0:
                nu[0] = rhs[0] / S[0, 0]
                solved = True
        else:
            det = S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]
            if abs(det) > 1e-12 * abs(S[0, 0] * S[1, 1]) and det != 0.0:
                nu[0] = (rhs[0] * S[1, 1] - S[0, 1] * rhs[1]) / det
                nu[1] = (S[0, 0] * rhs[1] - S[1, 0] * rhs[0]) / det
                solved = True
        if solved:
            for a in range(nf):
                s = 0.0
                for col in range(nc):
                    s += Y[a, col] * nu[col]
                w[free[a]] = s
            # the Schur route loses accuracy with cond(H_FF); fall back to the
            # full KKT system when the result misses its own equations
            hmax = 0.0
            for a in range(nf):
                hmax = max(hmax, abs(Hf[a, a]))
            for col in range(nc):
                r = -rhs[col]
                for a in range(nf):
                    r += A[a, col] * w[free[a]]
                if abs(r) > 1e-13:
                    solved = False
            for a in range(nf):
                r = 0.0
                for b in range(nf):
                    r += Hf[a, b] * w[free[b]]
                for col in range(nc):
                    r -= A[a, col] * nu[col]
                if abs(r) > 1e-13 * max(hmax, abs(nu[0])):
                    solved = False

    if not solved:
        # full KKT system with complete pivoting
        n = nf + nc
        K = np.zeros((n, n))
        for a in range(nf):
            for b in range(nf):
                K[a, b] = Hf[a, b]
            for col in range(nc):
                K[a, nf + col] = A[a, col]
                K[nf + col, a] = A[a, col]
        bb = np.zeros(n)
        for col in range(nc):
            bb[nf + col] = rhs[col]
        sol, ok2 = lu_full_pivot_solve(K, bb, 1e-13)
        if not ok2:
            return w, 0.0, 0.0, False
        w[:] = 0.0
        for a in range(nf):
            w[free[a]] = sol[a]
        for col in range(nc):
            nu[col] = -sol[nf + col]
    if use_floor:
        lam = nu[1] / scale
        return w, nu[0] - lam * R0, lam, True
    return w, nu[0], 0.0, True


@jit
def active_set_qp(Q, R, R0, ridge, max_changes, mult_tol, step_tol):
    """Primal active-set solve of

        min 1/2 w'(Q + ridge I)w  s.t.  w >= 0, sum(w) = 1, R'w >= R0.

    Starts at the vertex of the best-returning asset.  Constraint indices:
    bound on w_i is i, the return floor is d.

    Returns ``(status, w, fixed, ret_in, mu, lam, s, changes, ridge_used)``
    where ``fixed``/``ret_in`` describe the final working set and ``s`` holds
    the bound multipliers (zero off the working set).
    """
    d = R.shape[0]
    w = np.zeros(d)
    fixed = np.ones(d, dtype=np.bool_)
    s = np.zeros(d)
    ret_in = False
    mu = 0.0
    lam = 0.0

    for i in range(d):
        if not np.isfinite(R[i]):
            return NON_FINITE, w, fixed, ret_in, mu, lam, s, 0, ridge
        for j in range(d):
            if not np.isfinite(Q[i, j]):
                return NON_FINITE, w, fixed, ret_in, mu, lam, s, 0, ridge
    if not np.isfinite(R0):
        return NON_FINITE, w, fixed, ret_in, mu, lam, s, 0, ridge

    best = 0
    for i in range(1, d):
        if R[i] > R[best]:
            best = i
    if R[best] < R0:
        return INFEASIBLE, w, fixed, ret_in, mu, lam, s, 0, ridge
    w[best] = 1.0
    fixed[best] = False

    H = Q.copy()
    hscale = 0.0
    for i in range(d):
        H[i, i] += ridge
        hscale = max(hscale, H[i, i])
    # multiplier threshold scales with the Hessian so that Q -> sQ keeps the argmin
    mtol = mult_tol * hscale if hscale > 0.0 else mult_tol
    ridge_used = ridge
    escalations = 0
    changes = 0

    while True:
        wstar, mu, lam, ok = _solve_eqp(H, R, R0, fixed, ret_in)
        if not ok:
            if escalations >= 3:
                return SINGULAR, w, fixed, ret_in, mu, lam, s, changes, ridge_used
            trace = 0.0
            for i in range(d):
                trace += Q[i, i]
            bump = ridge_used * 10.0
            if bump <= 0.0:
                bump = 1e-12 * max(trace / d, 1.0)
            for i in range(d):
                H[i, i] += bump - ridge_used
            ridge_used = bump
            escalations += 1
            continue
        for i in range(d):
            if not np.isfinite(wstar[i]):
                return NON_FINITE, w, fixed, ret_in, mu, lam, s, changes, ridge_used

        pmax = 0.0
        for i in range(d):
            pmax = max(pmax, abs(wstar[i] - w[i]))

        if pmax <= step_tol:
            w = wstar
            # bound multipliers: s_i = (Hw)_i - mu - lam R_i on the working set
            drop = -1
            worst = -mtol
            for i in range(d):
                if fixed[i]:
                    g = 0.0
                    for j in range(d):
                        g += H[i, j] * w[j]
                    s[i] = g - mu - lam * R[i]
                    if s[i] < worst:
                        worst = s[i]
                        drop = i
                else:
                    s[i] = 0.0
            if ret_in and lam < worst:
                worst = lam
                drop = d
            if drop < 0:
                return OPTIMAL, w, fixed, ret_in, mu, lam, s, changes, ridge_used
            if drop == d:
                ret_in = False
            else:
                fixed[drop] = False
        else:
            alpha = 1.0
            block = -1
            for i in range(d):
                if not fixed[i]:
                    p = wstar[i] - w[i]
                    if p < 0.0:
                        a = max(w[i], 0.0) / (-p)
                        if a < alpha:
                            alpha = a
                            block = i
            if not ret_in:
                rp = 0.0
                rp_abs = 0.0
                slack = -R0
                for i in range(d):
                    rp += R[i] * (wstar[i] - w[i])
                    rp_abs += abs(R[i] * (wstar[i] - w[i]))
                    slack += R[i] * w[i]
                # a decrease within rounding of R'p is no decrease: adding the
                # floor then would make the working set linearly dependent
                if rp < -16.0 * d * 2.220446049250313e-16 * rp_abs:
                    a = max(slack, 0.0) / (-rp)
                    if a < alpha:
                        alpha = a
                        block = d
            if block < 0:
                w = wstar
                continue
            for i in range(d):
                w[i] = w[i] + alpha * (wstar[i] - w[i])
            if block == d:
                ret_in = True
            else:
                fixed[block] = True
                w[block] = 0.0
        changes += 1
        if changes > max_changes:
            return ITERATION_CAP, w, fixed, ret_in, mu, lam, s, changes, ridge_used


@jit
def relative_ridge(Q, rel, floor):
    d = Q.shape[0]
    trace = 0.0
    for i in range(d):
        trace += Q[i, i]
    if trace > 0.0:
        return rel * trace / d
    return floor


# ----------------------------------------------------------------------------
# day loop of the fixed-holding-period strategy
# ----------------------------------------------------------------------------

@jit
def simulate_days(log_returns, index_returns, prices, index_prices, weights,
                  first_day, last_day, q, k, ridge, ridge_rel, ridge_floor,
                  max_changes_per_dim, mult_tol, step_tol):
    """Evaluate every day in ``[first_day, last_day]`` independently.

    Day ``i`` indexes the price calendar; its return sits in row ``i - 1`` of
    ``log_returns`` / ``index_returns``.  ``weights`` (length p, oldest first)
    fixes the observation length.  ``ridge < 0`` selects the relative rule.
    """
    n_days = last_day - first_day + 1
    d = prices.shape[1]
    p = weights.shape[0]
    decision = np.full(n_days, -1, dtype=np.int64)
    status = np.zeros(n_days, dtype=np.int64)
    w_out = np.zeros((n_days, d))
    round_trip = np.zeros(n_days)
    ref_trip = np.zeros(n_days)
    target = np.zeros(n_days)
    mus = np.zeros(n_days)
    lams = np.zeros(n_days)
    bound_active = np.zeros((n_days, d), dtype=np.bool_)
    ret_active = np.zeros(n_days, dtype=np.bool_)
    ridges = np.zeros(n_days)

    for c in range(n_days):
        i = first_day + c
        ref_trip[c] = (index_prices[i + q] - index_prices[i]) / index_prices[i]
        r_idx = index_returns[i - 1]
        if not np.isfinite(r_idx):
            status[c] = NON_FINITE
            return decision, status, w_out, round_trip, ref_trip, target, mus, lams, bound_active, ret_active, ridges
        if r_idx <= 0.0:
            decision[c] = SKIPPED_INDEX_DOWN
            continue
        R0 = k * r_idx
        target[c] = R0
        window = log_returns[i - p:i]
        for t in range(p):
            for j in range(d):
                if not np.isfinite(window[t, j]):
                    status[c] = NON_FINITE
                    return decision, status, w_out, round_trip, ref_trip, target, mus, lams, bound_active, ret_active, ridges
        mean, cov = window_moments(window, weights)
        rg = ridge if ridge >= 0.0 else relative_ridge(cov, ridge_rel, ridge_floor)
        st, w, fixed, ret_in, mu, lam, s, changes, ridge_used = active_set_qp(
            cov, mean, R0, rg, max_changes_per_dim * d, mult_tol, step_tol)
        ridges[c] = ridge_used
        if st == INFEASIBLE:
            decision[c] = SKIPPED_INFEASIBLE
            continue
        if st != OPTIMAL:
            status[c] = st
            return decision, status, w_out, round_trip, ref_trip, target, mus, lams, bound_active, ret_active, ridges
        # clamp dust to [0, 1] and renormalise
        total = 0.0
        for j in range(d):
            v = min(max(w[j], 0.0), 1.0)
            w[j] = v
            total += v
        rt = 0.0
        for j in range(d):
            w[j] = w[j] / total
            w_out[c, j] = w[j]
            rt += w[j] * (prices[i + q, j] - prices[i, j]) / prices[i, j]
        decision[c] = TRADED
        round_trip[c] = rt
        mus[c] = mu
        lams[c] = lam
        ret_active[c] = ret_in
        for j in range(d):
            bound_active[c, j] = fixed[j]
    return decision, status, w_out, round_trip, ref_trip, target, mus, lams, bound_active, ret_active, ridges


# ----------------------------------------------------------------------------
# synthetic data
# ----------------------------------------------------------------------------

@jit
def correlate_rows(z, L, mean):
    """Rows of ``mean + z @ L.T`` with a fixed summation order."""
    T, d = z.shape
    out = np.empty((T, d))
    for t in range(T):
        for i in range(d):
            s = mean[i]
            for k in range(i + 1):
                s += L[i, k] * z[t, k]
            out[t, i] = s
    return out


@jit
def accumulate_prices(initial, log_returns):
    T1, d = log_returns.shape
    P = np.empty((T1 + 1, d))
    for j in range(d):
        P[0, j] = initial[j]
    for t in range(T1):
        for j in range(d):
            # math.exp is libm in both paths; numpy's own SIMD exp is not
            P[t + 1, j] = P[t, j] * math.exp(log_returns[t, j])
    return P
