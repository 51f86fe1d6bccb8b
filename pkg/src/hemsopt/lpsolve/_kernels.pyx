# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simplex iteration kernels.

Operation-for-operation port of ``_kernels_py``; see that module for the
array layout. Built with ``-ffp-contract=off`` so results match the numpy
backend bit for bit.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, fabs

cnp.import_array()

DEF OPTIMAL = 0
DEF INFEASIBLE = 1
DEF LIMIT = 2
DEF UNBOUNDED = 3
DEF BASIC = 0
DEF AT_LOWER = 1
DEF AT_UPPER = 2
DEF TIE = 1e-12


cdef void _pivot(double[:, ::1] T, double[::1] d, Py_ssize_t r, Py_ssize_t q,
                 Py_ssize_t[::1] nz) noexcept nogil:
    cdef Py_ssize_t m = T.shape[0], N = T.shape[1]
    cdef Py_ssize_t i, j, k, nnz = 0
    cdef double piv = T[r, q], f
    for j in range(N):
        T[r, j] = T[r, j] / piv
    T[r, q] = 1.0
    for j in range(N):
        if T[r, j] != 0.0:
            nz[nnz] = j
            nnz += 1
    for i in range(m):
        if i == r:
            continue
        f = T[i, q]
        if f == 0.0:
            continue
        for k in range(nnz):
            j = nz[k]
            T[i, j] = T[i, j] - f * T[r, j]
        T[i, q] = 0.0
    f = d[q]
    if f != 0.0:
        for k in range(nnz):
            j = nz[k]
            d[j] = d[j] - f * T[r, j]
    d[q] = 0.0


def pivot(double[:, ::1] T, double[::1] d, Py_ssize_t r, Py_ssize_t q):
    cdef Py_ssize_t[::1] nz = np.empty(T.shape[1], dtype=np.intp)
    _pivot(T, d, r, q, nz)


def dual_simplex(double[:, ::1] T, double[::1] beta, double[::1] d,
                 Py_ssize_t[::1] basis, signed char[::1] state,
                 double[::1] lb, double[::1] ub,
                 double tol_p, double tol_d, double tol_piv, Py_ssize_t max_iter):
    cdef Py_ssize_t m = T.shape[0], N = T.shape[1]
    cdef Py_ssize_t it = 0, i, j, r, p, q
    cdef double below, above, inf, best, target, a, dj, theta_max, bound, best_a, dx, xq, aq
    cdef signed char leave_state
    cdef bint increase, cand
    cdef Py_ssize_t[::1] nz = np.empty(N, dtype=np.intp)
    cdef int code = LIMIT
    with nogil:
        while it < max_iter:
            if m == 0:
                code = OPTIMAL
                break
            r = -1
            best = -INFINITY
            for i in range(m):
                j = basis[i]
                below = lb[j] - beta[i]
                above = beta[i] - ub[j]
                inf = below if below > above else above
                if inf > best:
                    best = inf
                    r = i
            if not best > tol_p:
                code = OPTIMAL
                break
            p = basis[r]
            below = lb[p] - beta[r]
            above = beta[r] - ub[p]
            if below > above:
                target = lb[p]
                leave_state = AT_LOWER
                increase = True
            else:
                target = ub[p]
                leave_state = AT_UPPER
                increase = False
            theta_max = INFINITY
            q = -1
            for j in range(N):
                if state[j] == BASIC or not lb[j] < ub[j]:
                    continue
                a = T[r, j]
                if increase:
                    cand = (state[j] == AT_LOWER and a < -tol_piv) or (state[j] == AT_UPPER and a > tol_piv)
                else:
                    cand = (state[j] == AT_LOWER and a > tol_piv) or (state[j] == AT_UPPER and a < -tol_piv)
                if not cand:
                    continue
                q = j
                a = fabs(a)
                if state[j] == AT_LOWER:
                    dj = d[j] if d[j] > 0.0 else 0.0
                else:
                    dj = -d[j] if -d[j] > 0.0 else 0.0
                bound = (dj + tol_d) / a
                if bound < theta_max:
                    theta_max = bound
            if q < 0:
                code = INFEASIBLE
                break
            q = -1
            best_a = -1.0
            for j in range(N):
                if state[j] == BASIC or not lb[j] < ub[j]:
                    continue
                a = T[r, j]
                if increase:
                    cand = (state[j] == AT_LOWER and a < -tol_piv) or (state[j] == AT_UPPER and a > tol_piv)
                else:
                    cand = (state[j] == AT_LOWER and a > tol_piv) or (state[j] == AT_UPPER and a < -tol_piv)
                if not cand:
                    continue
                a = fabs(a)
                if state[j] == AT_LOWER:
                    dj = d[j] if d[j] > 0.0 else 0.0
                else:
                    dj = -d[j] if -d[j] > 0.0 else 0.0
                if dj / a <= theta_max and a > best_a:
                    best_a = a
                    q = j
            aq = T[r, q]
            dx = (beta[r] - target) / aq
            xq = lb[q] if state[q] == AT_LOWER else ub[q]
            for i in range(m):
                beta[i] = beta[i] - dx * T[i, q]
            beta[r] = xq + dx
            _pivot(T, d, r, q, nz)
            basis[r] = q
            state[q] = BASIC
            state[p] = leave_state
            it += 1
    return code, it


def primal_simplex(double[:, ::1] T, double[::1] beta, double[::1] d,
                   Py_ssize_t[::1] basis, signed char[::1] state,
                   double[::1] lb, double[::1] ub,
                   double tol_p, double tol_d, double tol_piv, Py_ssize_t max_iter,
                   Py_ssize_t bland_after):
    cdef Py_ssize_t m = T.shape[0], N = T.shape[1]
    cdef Py_ssize_t it = 0, i, j, q, r, p, degenerate = 0
    cdef double score, best, direction, t_best, c, lim, tmin, best_a, xq
    cdef signed char leave_state
    cdef bint bland
    cdef double[::1] col = np.empty(m, dtype=np.float64)
    cdef double[::1] lims = np.empty(m, dtype=np.float64)
    cdef Py_ssize_t[::1] nz = np.empty(N, dtype=np.intp)
    cdef int code = LIMIT
    with nogil:
        while it < max_iter:
            bland = degenerate > bland_after
            q = -1
            best = -1.0
            for j in range(N):
                if not lb[j] < ub[j]:
                    continue
                if state[j] == AT_LOWER and d[j] < -tol_d:
                    score = fabs(d[j])
                elif state[j] == AT_UPPER and d[j] > tol_d:
                    score = fabs(d[j])
                else:
                    continue
                if bland:
                    q = j
                    break
                if score > best:
                    best = score
                    q = j
            if q < 0:
                code = OPTIMAL
                break
            direction = 1.0 if state[q] == AT_LOWER else -1.0
            t_best = ub[q] - lb[q]
            r = -1
            if m > 0:
                tmin = INFINITY
                for i in range(m):
                    c = T[i, q] * direction
                    col[i] = c
                    j = basis[i]
                    if c > tol_piv:
                        lim = (beta[i] - lb[j]) / c
                        if not lim > 0.0:
                            lim = 0.0
                    elif c < -tol_piv:
                        lim = (ub[j] - beta[i]) / (-c)
                        if not lim > 0.0:
                            lim = 0.0
                    else:
                        lim = INFINITY
                    lims[i] = lim
                    if lim < tmin:
                        tmin = lim
                if tmin < t_best:
                    best_a = -1.0
                    for i in range(m):
                        if lims[i] <= tmin + TIE:
                            if bland:
                                if r < 0 or basis[i] < basis[r]:
                                    r = i
                            elif fabs(col[i]) > best_a:
                                best_a = fabs(col[i])
                                r = i
                    t_best = lims[r]
            if t_best == INFINITY:
                code = UNBOUNDED
                break
            if t_best <= TIE:
                degenerate += 1
            else:
                degenerate = 0
            if r < 0:
                for i in range(m):
                    beta[i] = beta[i] - t_best * col[i]
                state[q] = AT_UPPER if state[q] == AT_LOWER else AT_LOWER
            else:
                p = basis[r]
                leave_state = AT_LOWER if col[r] > 0 else AT_UPPER
                xq = lb[q] if state[q] == AT_LOWER else ub[q]
                for i in range(m):
                    beta[i] = beta[i] - t_best * col[i]
                beta[r] = xq + direction * t_best
                _pivot(T, d, r, q, nz)
                basis[r] = q
                state[q] = BASIC
                state[p] = leave_state
            it += 1
    return code, it
