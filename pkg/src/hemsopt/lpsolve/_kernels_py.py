"""Pure numpy simplex iteration kernels.

Reference implementation of the hot loops; the compiled ``_kernels``
extension mirrors these functions operation for operation so both
backends take identical pivot sequences.

Shared state layout (all arrays modified in place):

``T``      m x N tableau ``B^-1 [A | I]``
``beta``   values of the basic variables, one per row
``d``      reduced costs, zero on basic columns
``basis``  column index basic in each row
``state``  BASIC / AT_LOWER / AT_UPPER per column
``lb, ub`` working bounds; nonbasic columns always sit on a finite one
"""

import numpy as np

OPTIMAL, INFEASIBLE, LIMIT, UNBOUNDED = 0, 1, 2, 3
BASIC, AT_LOWER, AT_UPPER = 0, 1, 2
TIE = 1e-12


def pivot(T, d, r, q):
    row = T[r]
    row /= row[q]
    row[q] = 1.0
    nz = np.flatnonzero(row)
    col = T[:, q].copy()
    col[r] = 0.0
    rows = np.flatnonzero(col)
    if rows.size:
        T[np.ix_(rows, nz)] -= np.outer(col[rows], row[nz])
        T[rows, q] = 0.0
    dq = d[q]
    if dq != 0.0:
        d[nz] -= dq * row[nz]
    d[q] = 0.0


def dual_simplex(T, beta, d, basis, state, lb, ub, tol_p, tol_d, tol_piv, max_iter):
    m = T.shape[0]
    it = 0
    while it < max_iter:
        if m == 0:
            return OPTIMAL, it
        lbB = lb[basis]
        ubB = ub[basis]
        below = lbB - beta
        above = beta - ubB
        infeas = np.maximum(below, above)
        r = int(np.argmax(infeas))
        if not infeas[r] > tol_p:
            return OPTIMAL, it
        p = basis[r]
        if below[r] > above[r]:
            target, leave_state, increase = lbB[r], AT_LOWER, True
        else:
            target, leave_state, increase = ubB[r], AT_UPPER, False
        alpha = T[r]
        movable = lb < ub
        at_l = (state == AT_LOWER) & movable
        at_u = (state == AT_UPPER) & movable
        if increase:
            cand = (at_l & (alpha < -tol_piv)) | (at_u & (alpha > tol_piv))
        else:
            cand = (at_l & (alpha > tol_piv)) | (at_u & (alpha < -tol_piv))
        idx = np.flatnonzero(cand)
        if idx.size == 0:
            return INFEASIBLE, it
        a = np.abs(alpha[idx])
        dj = np.where(state[idx] == AT_LOWER, np.maximum(d[idx], 0.0), np.maximum(-d[idx], 0.0))
        theta_max = np.min((dj + tol_d) / a)
        ok = dj / a <= theta_max
        best = np.where(ok, a, -1.0)
        q = int(idx[int(np.argmax(best))])
        aq = alpha[q]
        dx = (beta[r] - target) / aq
        xq = lb[q] if state[q] == AT_LOWER else ub[q]
        beta -= dx * T[:, q]
        beta[r] = xq + dx
        pivot(T, d, r, q)
        basis[r] = q
        state[q] = BASIC
        state[p] = leave_state
        it += 1
    return LIMIT, it


def primal_simplex(T, beta, d, basis, state, lb, ub, tol_p, tol_d, tol_piv, max_iter, bland_after):
    m = T.shape[0]
    it = 0
    degenerate = 0
    while it < max_iter:
        movable = lb < ub
        elig = ((state == AT_LOWER) & movable & (d < -tol_d)) | ((state == AT_UPPER) & movable & (d > tol_d))
        if not elig.any():
            return OPTIMAL, it
        if degenerate > bland_after:
            q = int(np.argmax(elig))
        else:
            q = int(np.argmax(np.where(elig, np.abs(d), -1.0)))
        direction = 1.0 if state[q] == AT_LOWER else -1.0
        t_best = ub[q] - lb[q]
        r = -1
        if m:
            col = T[:, q] * direction
            lbB = lb[basis]
            ubB = ub[basis]
            lim = np.full(m, np.inf)
            pos = col > tol_piv
            neg = col < -tol_piv
            lim[pos] = np.maximum((beta[pos] - lbB[pos]) / col[pos], 0.0)
            lim[neg] = np.maximum((ubB[neg] - beta[neg]) / (-col[neg]), 0.0)
            tmin = np.min(lim)
            if tmin < t_best:
                ties = lim <= tmin + TIE
                if degenerate > bland_after:
                    tied = np.flatnonzero(ties)
                    r = int(tied[int(np.argmin(basis[tied]))])
                else:
                    r = int(np.argmax(np.where(ties, np.abs(col), -1.0)))
                t_best = lim[r]
        if not np.isfinite(t_best):
            return UNBOUNDED, it
        degenerate = degenerate + 1 if t_best <= TIE else 0
        if r < 0:
            if m:
                beta -= t_best * col
            state[q] = AT_UPPER if state[q] == AT_LOWER else AT_LOWER
        else:
            p = basis[r]
            leave_state = AT_LOWER if col[r] > 0 else AT_UPPER
            xq = lb[q] if state[q] == AT_LOWER else ub[q]
            beta -= t_best * col
            beta[r] = xq + direction * t_best
            pivot(T, d, r, q)
            basis[r] = q
            state[q] = BASIC
            state[p] = leave_state
        it += 1
    return LIMIT, it
