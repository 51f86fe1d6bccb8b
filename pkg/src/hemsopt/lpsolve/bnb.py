"""Best-first branch and bound on top of :class:`SimplexSolver`."""

from __future__ import annotations

import heapq
import math

import numpy as np

from .kernels import AT_LOWER, AT_UPPER
from .problem import MipProblem, SolveOutcome, Status, ToleranceSettings
from .simplex import SimplexSolver


def simple_rounding(lp, x, integral, tol, b=None):
    """Round fractional integers one at a time, keeping every row satisfied.

    Continuous values are left untouched, so this only succeeds when each
    integer can move to a neighbouring integer without breaking a row
    (mode indicators, slack binaries). Returns the rounded point or None.
    """
    x = x.copy()
    b = lp.b if b is None else b
    act = lp.A @ x
    senses = lp.senses
    for j in integral:
        v = x[j]
        lo, hi = math.floor(v + tol.integrality), math.ceil(v - tol.integrality)
        if lo == hi:
            x[j] = float(lo)
            continue
        col = lp.A[:, j]
        rows = np.flatnonzero(col)
        placed = False
        for target in (hi, lo):
            if target < lp.lb[j] - tol.feasibility or target > lp.ub[j] + tol.feasibility:
                continue
            new = act[rows] + col[rows] * (target - v)
            ok = True
            for k, i in enumerate(rows):
                s, rhs = senses[i], b[i]
                if s == "<=" and new[k] > rhs + tol.feasibility:
                    ok = False
                elif s == ">=" and new[k] < rhs - tol.feasibility:
                    ok = False
                elif s == "=" and abs(new[k] - rhs) > tol.feasibility:
                    ok = False
                if not ok:
                    break
            if ok:
                act[rows] = new
                x[j] = float(target)
                placed = True
                break
        if not placed:
            return None
    return x


def dive(solver, x, integral, lb, ub, tol, max_steps=None):
    """Fix integers one at a time (closest to integral first) and re-solve.

    Returns ``(objective, x, iterations)`` of the integral point reached,
    or None. The solver's bounds and basis are left modified; callers
    restore them.
    """
    lb, ub = lb.copy(), ub.copy()
    iterations = 0
    steps = max_steps or 2 * len(integral) + 1
    for _ in range(steps):
        best_j, best_f, best_v = -1, math.inf, 0.0
        for j in integral:
            v = x[j]
            r = math.floor(v + 0.5)
            f = abs(v - r)
            if f > tol.integrality and f < best_f:
                best_j, best_f, best_v = j, f, r
        if best_j < 0:
            return solver.lp.objective(x), x, iterations
        placed = False
        for target in (best_v, best_v + (1.0 if x[best_j] > best_v else -1.0)):
            if target < lb[best_j] or target > ub[best_j]:
                continue
            snap = solver.get_basis()
            lb[best_j] = ub[best_j] = target
            solver.set_bounds(lb, ub)
            out = solver.solve()
            iterations += out.iterations
            if out.status is Status.OPTIMAL:
                x = out.x
                placed = True
                break
            solver.set_basis(snap)
        if not placed:
            return None
    return None


def _most_fractional(x, integral, tol):
    best, best_j = tol, -1
    for j in integral:
        f = x[j] - math.floor(x[j])
        score = min(f, 1.0 - f)
        if score > best:
            best, best_j = score, j
    return best_j


def solve_mip(mip: MipProblem, tol: ToleranceSettings | None = None, *,
              solver: SimplexSolver | None = None, backend=None, incumbent=None) -> SolveOutcome:
    """Minimise a mixed-integer program.

    Nodes are explored best-bound first (ties in creation order); the
    branching variable is the most fractional integer, lowest index on
    ties, down-branch created first. When that variable belongs to a
    choice set the set is split at its fractional mean position instead.
    ``solver`` may carry a warm basis for the root relaxation; its bounds
    are restored on return. ``incumbent`` is an optional known feasible
    point, used only if it passes a feasibility check.
    """
    tol = tol or ToleranceSettings()
    lp = mip.lp
    integral = list(mip.integral)
    own = solver is None
    if own:
        solver = SimplexSolver(lp, tol, backend=backend)
    base_lb = solver.true_lb[: lp.num_vars].copy()
    base_ub = solver.true_ub[: lp.num_vars].copy()
    int_idx = np.array(integral, dtype=int)
    if int_idx.size:
        # integral bounds are rounded inward
        base_lb[int_idx] = np.ceil(base_lb[int_idx] - tol.integrality)
        base_ub[int_idx] = np.floor(base_ub[int_idx] + tol.integrality)
        if np.any(base_lb > base_ub):
            return SolveOutcome(Status.INFEASIBLE, message="empty integer domain")
    try:
        start = None
        if incumbent is not None and _feasible(lp, np.asarray(incumbent, dtype=float), integral, base_lb,
                                               base_ub, solver.b, tol):
            start = np.asarray(incumbent, dtype=float).copy()
        return _branch_and_bound(lp, solver, integral, int_idx, base_lb, base_ub, tol,
                                 mip.choice_sets, start)
    finally:
        solver.set_bounds(base_lb, base_ub)


def _feasible(lp, x, integral, lb, ub, b, tol):
    if x.shape != (lp.num_vars,):
        return False
    if np.any(x < lb - tol.feasibility) or np.any(x > ub + tol.feasibility):
        return False
    if integral and np.any(np.abs(x[integral] - np.round(x[integral])) > tol.integrality):
        return False
    act = lp.A @ x
    scale = tol.feasibility * (1.0 + np.abs(b))
    for i, sense in enumerate(lp.senses):
        if sense == "<=" and act[i] > b[i] + scale[i]:
            return False
        if sense == ">=" and act[i] < b[i] - scale[i]:
            return False
        if sense == "=" and abs(act[i] - b[i]) > scale[i]:
            return False
    return True


def _reduced_cost_fix(outcome, incumbent, int_idx, nlo, nhi, tol):
    """Tighten node bounds of integers whose reduced cost alone exceeds the incumbent gap."""
    d = outcome.extra.get("reduced_costs")
    if d is None or not math.isfinite(incumbent):
        return
    room = incumbent - outcome.objective - tol.mip_gap
    state = outcome.extra["state"][int_idx]
    d = d[int_idx]
    x = outcome.x[int_idx]
    lower = (state == AT_LOWER) & (d > room) & (nhi > nlo)
    upper = (state == AT_UPPER) & (-d > room) & (nhi > nlo)
    nhi[lower] = np.floor(x[lower] + tol.integrality)
    nlo[upper] = np.ceil(x[upper] - tol.integrality)


def _split_set(x, group, tol):
    """Position ``k`` splitting a fractional choice set into two non-empty sides."""
    vals = x[list(group)]
    pos = np.flatnonzero(vals > tol)
    if pos.size < 2:
        return None
    mean = float(pos @ vals[pos]) / float(vals[pos].sum())
    left = pos[pos <= mean]
    k = int(left[-1]) if left.size else int(pos[0])
    if k >= pos[-1]:
        k = int(pos[-2])
    return k


def _branch_and_bound(lp, solver, integral, int_idx, base_lb, base_ub, tol, choice_sets=(), start=None):
    solver.set_bounds(base_lb, base_ub)
    root = solver.solve()
    iterations = root.iterations
    if root.status is not Status.OPTIMAL:
        root.nodes = 1
        return root
    root_bound = root.objective
    if not integral:
        root.gap = 0.0
        root.bound = root_bound
        root.nodes = 1
        return root

    incumbent_x, incumbent = None, math.inf
    if start is not None:
        incumbent_x, incumbent = start, lp.objective(start)
    position = {j: k for k, j in enumerate(integral)}
    set_of = {j: g for g in choice_sets for j in g}
    root_basis = solver.get_basis()
    found = dive(solver, root.x, integral, base_lb, base_ub, tol)
    if found is not None and found[0] < incumbent:
        incumbent, incumbent_x, it = found[0], found[1].copy(), found[2]
        iterations += it
    solver.set_basis(root_basis)
    counter = 0
    heap = [(root_bound, counter, base_lb[int_idx].copy(), base_ub[int_idx].copy(), None, root)]
    nodes = 0
    lb = base_lb.copy()
    ub = base_ub.copy()
    while heap:
        key, _, nlo, nhi, basis, outcome = heapq.heappop(heap)
        if key >= incumbent - tol.mip_gap:
            continue
        if nodes >= tol.max_nodes:
            heapq.heappush(heap, (key, -1, nlo, nhi, basis, outcome))
            break
        nodes += 1
        if outcome is None:
            lb[int_idx] = nlo
            ub[int_idx] = nhi
            solver.set_bounds(lb, ub)
            solver.set_basis(basis)
            outcome = solver.solve()
            iterations += outcome.iterations
            if outcome.status is Status.INFEASIBLE:
                continue
            if outcome.status is not Status.OPTIMAL:
                heapq.heappush(heap, (key, -1, nlo, nhi, None, None))
                break
            if outcome.objective >= incumbent - tol.mip_gap:
                continue
        x = outcome.x
        j = _most_fractional(x, integral, tol.integrality)
        if j < 0:
            incumbent, incumbent_x = outcome.objective, x.copy()
            continue
        rounded = simple_rounding(lp, x, integral, tol, solver.b)
        if rounded is not None:
            val = lp.objective(rounded)
            if val < incumbent - tol.mip_gap:
                incumbent, incumbent_x = val, rounded
                if outcome.objective >= incumbent - tol.mip_gap:
                    continue
        nlo, nhi = nlo.copy(), nhi.copy()
        _reduced_cost_fix(outcome, incumbent, int_idx, nlo, nhi, tol)
        snapshot = solver.get_basis()
        split = _split_set(x, set_of[j], tol.integrality) if j in set_of else None
        if split is not None:
            group = set_of[j]
            down_hi = nhi.copy()
            up_lo = nlo.copy()
            for p, col in enumerate(group):
                if p > split:
                    down_hi[position[col]] = 0.0
            up_hi = nhi.copy()
            for p, col in enumerate(group):
                if p <= split:
                    up_hi[position[col]] = 0.0
            counter += 1
            heapq.heappush(heap, (outcome.objective, counter, nlo.copy(), down_hi, snapshot, None))
            counter += 1
            heapq.heappush(heap, (outcome.objective, counter, up_lo, up_hi, snapshot, None))
            continue
        k = position[j]
        down_hi = nhi.copy()
        down_hi[k] = math.floor(x[j])
        up_lo = nlo.copy()
        up_lo[k] = math.ceil(x[j])
        counter += 1
        heapq.heappush(heap, (outcome.objective, counter, nlo.copy(), down_hi, snapshot, None))
        counter += 1
        heapq.heappush(heap, (outcome.objective, counter, up_lo, nhi.copy(), snapshot, None))

    open_bound = min((item[0] for item in heap), default=math.inf)
    if incumbent_x is None:
        if heap:
            return SolveOutcome(Status.ITERATION_LIMIT, bound=open_bound, iterations=iterations,
                                nodes=nodes, message="node budget exhausted without incumbent")
        return SolveOutcome(Status.INFEASIBLE, iterations=iterations, nodes=nodes,
                            message="no integral point in the tree")
    best_bound = min(open_bound, incumbent)
    gap = max(incumbent - best_bound, 0.0)
    if incumbent < root_bound - 1e-6 * max(1.0, abs(root_bound)):
        raise AssertionError("MIP optimum below its LP relaxation")
    xi = incumbent_x.copy()
    xi[int_idx] = np.round(xi[int_idx])
    status = Status.OPTIMAL if not heap else Status.ITERATION_LIMIT
    return SolveOutcome(status, objective=incumbent, x=xi, gap=gap, bound=best_bound,
                        iterations=iterations, nodes=nodes,
                        message="" if not heap else "node budget exhausted")
