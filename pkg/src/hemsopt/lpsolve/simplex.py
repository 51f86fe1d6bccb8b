"""Dense bounded-variable tableau simplex.

Every row ``i`` of ``A x (sense) b`` gets a logical column ``s_i`` so the
working system is ``A x + s = b`` with sense-dependent bounds on ``s``
(``<=``: ``s >= 0``, ``>=``: ``s <= 0``, ``=``: ``s = 0``). The logical
columns form the identity, so a cold start uses the slack basis and the
tableau's logical block always holds ``B^-1``.

A solve runs the dual simplex on slightly perturbed costs (this doubles
as phase one from the slack basis, and is the natural warm start after
bound or right-hand-side edits), then restores the true costs and
finishes with the primal simplex, which falls back to Bland's rule after
a run of degenerate pivots.

Infinite bounds are replaced by a large box while iterating, at least
``1e6`` and ten times the largest right-hand side. A solution touching
the box triggers a retry with a larger box and eventually an
``Unbounded`` report; an infeasibility proof is only accepted once the
box has reached its ceiling or no bound was boxed.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .kernels import AT_LOWER, AT_UPPER, BASIC
from .problem import LinearProgram, SolveOutcome, Status, ToleranceSettings

_BOX = 1e6
_BLAND_AFTER = 50


class SimplexSolver:
    """Re-usable simplex state for one constraint matrix.

    Right-hand sides and structural bounds may be edited between calls to
    :meth:`solve`; the previous optimal basis is then used as a warm start.
    """

    def __init__(self, lp: LinearProgram, tol: ToleranceSettings | None = None, backend=None):
        self.lp = lp
        self.tol = tol or ToleranceSettings()
        self.k = kernels.get_backend(backend)
        m, n = lp.A.shape
        self.m, self.n = m, n
        self.A_full = np.ascontiguousarray(np.hstack([lp.A, np.eye(m)]))
        self.c_full = np.concatenate([lp.c, np.zeros(m)])
        senses = np.array(lp.senses, dtype=object)
        log_lb = np.where(senses == ">=", -np.inf, 0.0).astype(float)
        log_ub = np.where(senses == "<=", np.inf, 0.0).astype(float)
        self.true_lb = np.concatenate([lp.lb, log_lb])
        self.true_ub = np.concatenate([lp.ub, log_ub])
        self.b = lp.b.copy()
        self.box = _BOX
        self.basis = None
        self.state = None
        self.iterations = 0
        self._solve_start = 0
        # last tableau, kept for re-solves that start from the same basis
        self._tab = None
        self._since_refactor = 0
        self._pinned = None
        # deterministic perturbation magnitudes in [0.5, 1)
        self._pert = 0.5 + 0.5 * np.random.default_rng(20210111).random(n + m)

    # -- editing -----------------------------------------------------------
    def set_rhs(self, b):
        b = np.asarray(b, dtype=float).ravel()
        if b.size != self.m:
            raise ValueError("rhs size mismatch")
        self.b = b.copy()

    def set_bounds(self, lb, ub):
        lb = np.asarray(lb, dtype=float).ravel()
        ub = np.asarray(ub, dtype=float).ravel()
        if lb.size != self.n or ub.size != self.n or np.any(lb > ub):
            raise ValueError("invalid structural bounds")
        self.true_lb[: self.n] = lb
        self.true_ub[: self.n] = ub

    def get_basis(self):
        if self.basis is None:
            return None
        return self.basis.copy(), self.state.copy()

    def set_basis(self, snapshot):
        if snapshot is None:
            self.basis = self.state = None
        else:
            self.basis = snapshot[0].copy()
            self.state = snapshot[1].copy()

    def pin_basis(self):
        """Remember the current basis (and its tableau) as the start for :meth:`restart`."""
        if self.basis is None:
            raise ValueError("no basis to pin")
        tab = None
        if self._tab is not None and np.array_equal(self._tab[1], self.basis):
            tab = self._tab[0].copy()
        self._pinned = (self.basis.copy(), self.state.copy(), tab)

    def restart(self):
        """Return to the pinned basis so the next solve depends only on the data."""
        basis, state, tab = self._pinned
        self.basis, self.state = basis.copy(), state.copy()
        self._tab = None if tab is None else (tab.copy(), basis.copy())
        self._since_refactor = 0

    # -- internals ---------------------------------------------------------
    def _working_bounds(self):
        lb = np.maximum(self.true_lb, -self.box)
        ub = np.minimum(self.true_ub, self.box)
        return lb, ub

    def _slack_start(self):
        m, n = self.m, self.n
        self.basis = np.arange(n, n + m, dtype=np.intp)
        state = np.full(n + m, BASIC, dtype=np.int8)
        state[:n] = np.where(self.c_full[:n] < 0, AT_UPPER, AT_LOWER)
        self.state = state

    def _nonbasic_values(self, lb, ub):
        x = np.where(self.state == AT_UPPER, ub, lb)
        x[self.basis] = 0.0
        return x

    def _binv_apply(self, M):
        """Return ``B^-1 M`` for the current basis, or None when singular.

        Basic logical columns are unit vectors, so only the block of basic
        structural columns on the rows not covered by logicals is inverted.
        """
        n = self.n
        basis = self.basis
        is_log = basis >= n
        log_rows = basis[is_log] - n
        cover = np.zeros(self.m, dtype=bool)
        cover[log_rows] = True
        rest = np.flatnonzero(~cover)
        struct = basis[~is_log]
        out = np.empty((self.m,) + M.shape[1:])
        if struct.size:
            blk = self.A_full[np.ix_(rest, struct)]
            try:
                inv = np.linalg.inv(blk)
            except np.linalg.LinAlgError:
                return None
            xs = inv @ M[rest]
            out[~is_log] = xs
            out[is_log] = M[log_rows] - self.A_full[np.ix_(log_rows, struct)] @ xs
        else:
            out[is_log] = M[log_rows]
        if not np.all(np.isfinite(out)):
            return None
        return out

    def _refactor(self, lb, ub, costs):
        xN = self._nonbasic_values(lb, ub)
        rhs = np.column_stack([self.A_full, self.b - self.A_full @ xN])
        sol = self._binv_apply(rhs)
        if sol is None:
            return None
        T = np.ascontiguousarray(sol[:, :-1])
        beta = np.ascontiguousarray(sol[:, -1])
        basic = self.basis
        T[:, basic] = np.eye(self.m)
        d = costs - costs[basic] @ T
        d[basic] = 0.0
        self._since_refactor = 0
        self._tab = (T, self.basis.copy())
        return T, beta, d

    def _reuse(self, lb, ub, costs):
        """Tableau of the previous solve when the basis is unchanged, else None.

        ``B^-1 A`` does not depend on bounds or right-hand side, so only the
        basic values and reduced costs are recomputed. The logical block of
        the tableau is ``B^-1``.
        """
        if self._tab is None or self._since_refactor >= self.tol.refactor_every // 2:
            return None
        T, basis = self._tab
        if basis.shape != self.basis.shape or not np.array_equal(basis, self.basis):
            return None
        xN = self._nonbasic_values(lb, ub)
        beta = np.ascontiguousarray(T[:, self.n:] @ (self.b - self.A_full @ xN))
        return T, beta, self._reprice(T, costs)

    def _run(self, which, T, beta, d, lb, ub, budget):
        tol = self.tol
        if which == "dual":
            code, it = self.k.dual_simplex(T, beta, d, self.basis, self.state, lb, ub,
                                           tol.feasibility, tol.optimality, tol.pivot, budget)
        else:
            code, it = self.k.primal_simplex(T, beta, d, self.basis, self.state, lb, ub,
                                             tol.feasibility, tol.optimality, tol.pivot, budget,
                                             _BLAND_AFTER)
        self.iterations += it
        self._since_refactor += it
        return code

    def _phase(self, which, lb, ub, costs, fac=None):
        """Run one algorithm to completion with periodic refactorisation.

        Returns ``(code, (T, beta, d))``; the tableau is the final one so a
        following phase can continue without refactorising.
        """
        tol = self.tol
        while True:
            if fac is None:
                fac = self._refactor(lb, ub, costs)
                if fac is None:
                    return "singular", None
            T, beta, d = fac
            budget = min(tol.refactor_every, tol.max_iterations - (self.iterations - self._solve_start))
            if budget <= 0:
                return kernels.LIMIT, fac
            code = self._run(which, T, beta, d, lb, ub, budget)
            if code != kernels.LIMIT:
                return code, fac
            fac = None

    def _perturbed_costs(self):
        c = self.c_full.copy()
        eps = self.tol.optimality * 100.0 * (1.0 + np.abs(c)) * self._pert
        c = c + np.where(self.state == AT_UPPER, -eps, np.where(self.state == AT_LOWER, eps, 0.0))
        return c

    def _reprice(self, T, costs):
        d = costs - costs[self.basis] @ T
        d[self.basis] = 0.0
        return d

    def _box_involved(self, beta, lb, ub):
        """True when a box bound, not a model bound, may be what blocks feasibility."""
        inf_lb, inf_ub = np.isinf(self.true_lb), np.isinf(self.true_ub)
        nb = ((self.state == AT_LOWER) & inf_lb) | ((self.state == AT_UPPER) & inf_ub)
        B = self.basis
        ftol = self.tol.feasibility
        basic = ((beta < lb[B] - ftol) & inf_lb[B]) | ((beta > ub[B] + ftol) & inf_ub[B])
        return bool(nb.any() or basic.any())

    # -- main entry --------------------------------------------------------
    def solve(self) -> SolveOutcome:
        out = self._solve()
        if out.status not in (Status.OPTIMAL, Status.INFEASIBLE):
            self._tab = None
        return out

    def _solve(self) -> SolveOutcome:
        tol = self.tol
        start_iter = self._solve_start = self.iterations
        if self.basis is None:
            self._slack_start()
        self.box = max(_BOX, 10.0 * float(np.max(np.abs(self.b), initial=0.0)))
        box_cap = self.box * 1e6
        for attempt in range(8):
            lb, ub = self._working_bounds()
            costs = self._perturbed_costs()
            reused = self._reuse(lb, ub, costs) if attempt == 0 else None
            code, fac = self._phase("dual", lb, ub, costs, reused)
            if code == "singular":
                self._slack_start()
                continue
            if code == kernels.INFEASIBLE:
                if reused is not None:
                    continue  # confirm on a fresh factorisation
                if self.box < box_cap and self._box_involved(fac[1], lb, ub):
                    self.box *= 1e3
                    continue
                self._tab = (fac[0], self.basis.copy())
                return SolveOutcome(Status.INFEASIBLE, iterations=self.iterations - start_iter,
                                    message="dual simplex found no entering column")
            if code == kernels.LIMIT:
                return SolveOutcome(Status.ITERATION_LIMIT, iterations=self.iterations - start_iter,
                                    message="iteration limit in dual simplex")
            T, beta, _ = fac
            code, fac = self._phase("primal", lb, ub, self.c_full, (T, beta, self._reprice(T, self.c_full)))
            if code == "singular":
                self._slack_start()
                continue
            if code == kernels.LIMIT:
                return SolveOutcome(Status.ITERATION_LIMIT, iterations=self.iterations - start_iter,
                                    message="iteration limit in primal simplex")
            if code == kernels.UNBOUNDED:
                return SolveOutcome(Status.UNBOUNDED, iterations=self.iterations - start_iter,
                                    message="primal ray found")
            T, beta, d = fac
            x = self._nonbasic_values(lb, ub)
            x[self.basis] = beta
            # accuracy check on the original rows; refactorise and retry on drift
            resid = float(np.max(np.abs(self.A_full @ x - self.b), initial=0.0))
            infeas = max(float(np.max(lb - x, initial=0.0)), float(np.max(x - ub, initial=0.0)))
            nb = self.state != BASIC
            movable = lb < ub
            dinf = np.where((self.state == AT_LOWER) & movable, -d,
                            np.where((self.state == AT_UPPER) & movable, d, 0.0))
            dual_inf = float(np.max(dinf[nb], initial=0.0))
            if resid > tol.feasibility * (1.0 + float(np.max(np.abs(x), initial=0.0))) or infeas > tol.feasibility or dual_inf > tol.optimality * 1e3:
                continue
            on_box = (np.isinf(self.true_ub) & (x >= self.box * (1 - 1e-9))) | \
                     (np.isinf(self.true_lb) & (x <= -self.box * (1 - 1e-9)))
            if on_box.any():
                if self.box >= box_cap:
                    return SolveOutcome(Status.UNBOUNDED, iterations=self.iterations - start_iter,
                                        message="solution diverges past the bounding box")
                self.box *= 1e3
                continue
            self._tab = (T, self.basis.copy())
            xs = x[: self.n].copy()
            return SolveOutcome(Status.OPTIMAL, objective=self.lp.objective(xs), x=xs,
                                iterations=self.iterations - start_iter,
                                extra={"reduced_costs": d[: self.n].copy(), "state": self.state[: self.n].copy()})
        return SolveOutcome(Status.ITERATION_LIMIT, iterations=self.iterations - start_iter,
                            message="numerical breakdown: could not reach a stable optimal basis")


def solve_lp(lp: LinearProgram, tol: ToleranceSettings | None = None, backend=None) -> SolveOutcome:
    """Solve ``lp`` from the slack basis."""
    return SimplexSolver(lp, tol, backend=backend).solve()
