"""Scenario drivers: normal, economic, smart and the weight sweep."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .formulation import (build_economic_milp, build_min_peak_mip, flows_from_solution, start_domain,
                          starts_from_solution)
from .lowerbound import lower_bound
from .lpsolve import MipProblem, SimplexSolver, Status, ToleranceSettings, solve_mip
from .model import (DaySolution, FlowVector, Instance, ScheduleAssignment, Weights, appliance_demand,
                    res_energy, validate_instance)
from .objectives import NonPositiveDenominator, evaluate, mo_value, par, user_convenience, waiting_time

NORMAL, ECONOMIC, SMART = "normal", "economic", "smart"


class ScheduleInfeasible(ValueError):
    """No schedule satisfies the start-window and consecutive rules."""


class SolverFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = SMART
    alpha: float | None = None
    weights: Weights | None = None
    cap_levels: int = 12
    radius: int = 3
    max_passes: int = 20
    pair_moves: bool = True
    exhaustive_limit: int = 4096
    warm_incumbent: bool = True
    node_limit: int = 5000
    strict_utr: bool = False
    tol: ToleranceSettings = field(default_factory=ToleranceSettings)

    def __post_init__(self):
        if self.scenario not in (NORMAL, ECONOMIC, SMART):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.cap_levels < 2:
            raise ValueError("cap_levels must be >= 2")
        if self.radius < 1:
            raise ValueError("radius must be >= 1")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")
        if self.node_limit < 1:
            raise ValueError("node_limit must be >= 1")


def _check_valid(instance):
    report = validate_instance(instance)
    if not report.ok:
        raise ValueError("invalid instance: " + "; ".join(report.violations))


def _topological(instance):
    names = [a.name for a in instance.shiftable]
    indeg = {n: 0 for n in names}
    for c in instance.consecutive:
        indeg[c.successor] += 1
    order, ready = [], [n for n in names if indeg[n] == 0]
    while ready:
        u = ready.pop(0)
        order.append(u)
        for c in instance.consecutive:
            if c.predecessor == u:
                indeg[c.successor] -= 1
                if indeg[c.successor] == 0:
                    ready.append(c.successor)
    return order


def repair_forward(instance, start):
    """Push successors forward just enough to satisfy every consecutive rule."""
    start = dict(start)
    for name in _topological(instance):
        for c in instance.consecutive:
            if c.successor == name:
                j = instance.appliance(c.predecessor)
                start[name] = max(start[name], start[c.predecessor] + j.lot + c.min_delay)
    return start


def _schedule_ok(instance, start, domains=None):
    for a in instance.shiftable:
        s = start[a.name]
        if domains is not None:
            if s not in domains[a.name]:
                return False
        elif not 0 <= s <= instance.T - a.lot:
            return False
    for c in instance.consecutive:
        j = instance.appliance(c.predecessor)
        if start[c.predecessor] + j.lot + c.min_delay > start[c.successor]:
            return False
    return True


def _solution(instance, schedule, flows, alpha, weights, scenario, peak_cap=None, proven=True, info=None):
    br = evaluate(instance, schedule, flows, alpha, weights)
    return DaySolution(schedule, flows, br.cost_cents, br.uc_raw, br.uc_index_percent, br.par,
                       br.wt_slots, br.mo_value, scenario, alpha, peak_cap, proven, info or {})


def normal_starts(instance: Instance) -> ScheduleAssignment:
    """Resident-requested starts when given, else earliest BTR slots.

    Successors are pushed forward until every consecutive rule holds, then
    each predecessor is pulled later, without leaving its BTR, to close
    the wait before its successors.
    """
    T = instance.T
    start = {}
    for a in instance.shiftable:
        if instance.normal_start and a.name in instance.normal_start:
            start[a.name] = instance.normal_start[a.name]
        else:
            start[a.name] = min(a.btr[0], T - a.lot)
    start = repair_forward(instance, start)
    requested = set(instance.normal_start or ())
    for name in reversed(_topological(instance)):
        if name in requested:
            continue
        a = instance.appliance(name)
        slack = [start[c.successor] - start[name] - a.lot - c.min_delay
                 for c in instance.consecutive if c.predecessor == name]
        if slack:
            room = min(a.btr[1], T - 1) - a.lot + 1 - start[name]
            start[name] += max(0, min(min(slack), room))
    if not _schedule_ok(instance, start):
        raise ScheduleInfeasible("requested starts cannot satisfy the day length and consecutive rules")
    return ScheduleAssignment(start)


def run_normal(instance: Instance, config: ScenarioConfig | None = None) -> DaySolution:
    """No optimisation, no PV, no storage: the grid serves the demand as requested."""
    _check_valid(instance)
    config = config or ScenarioConfig(NORMAL)
    alpha = instance.alpha if config.alpha is None else config.alpha
    weights = config.weights or instance.weights
    schedule = normal_starts(instance)
    flows = FlowVector.idle(instance, appliance_demand(instance, schedule))
    return _solution(instance, schedule, flows, alpha, weights, NORMAL)


def run_economic(instance: Instance, alpha=None, config: ScenarioConfig | None = None) -> DaySolution:
    """Minimum-cost schedule and dispatch.

    Branch and bound starts from a cost local search incumbent. When the
    node limit runs out the best schedule found is returned with
    ``proven`` False and the remaining gap in ``info``.
    """
    _check_valid(instance)
    config = config or ScenarioConfig(ECONOMIC)
    alpha = (instance.alpha if config.alpha is None else config.alpha) if alpha is None else alpha
    weights = config.weights or instance.weights
    mip = build_economic_milp(instance, alpha, strict_utr=config.strict_utr)
    start = _economic_incumbent(instance, alpha, mip, config) if config.warm_incumbent else None
    tol = replace(config.tol, max_nodes=min(config.tol.max_nodes, config.node_limit))
    out = solve_mip(mip, tol, incumbent=start)
    if out.status is Status.INFEASIBLE:
        raise ScheduleInfeasible("no start schedule satisfies the windows and consecutive rules")
    if out.x is None:
        raise SolverFailure(f"economic model: {out.status.value} {out.message}")
    schedule = starts_from_solution(instance, mip.lp, out.x)
    flows = flows_from_solution(mip.lp, out.x)
    sol = _solution(instance, schedule, flows, alpha, weights, ECONOMIC, proven=out.status is Status.OPTIMAL,
                    info={"gap": out.gap, "nodes": out.nodes, "bound": out.bound})
    if not config.strict_utr:
        lb = lower_bound(instance, alpha, config.tol).total_bound
        if lb > sol.cost_cents + 1e-6 * max(1.0, abs(sol.cost_cents)):
            raise AssertionError(f"lower bound {lb} exceeds economic cost {sol.cost_cents}")
    return sol


class DispatchEvaluator:
    """Re-usable dispatch models for many schedules of one instance.

    Appliance demand and the grid cap sit in the right-hand side, so each
    schedule is a warm-started re-solve of the same matrix.
    """

    def __init__(self, instance: Instance, alpha, tol: ToleranceSettings):
        self.instance, self.alpha, self.tol = instance, alpha, tol
        T = instance.T
        self.big = None
        probe = ScheduleAssignment({a.name: 0 for a in instance.shiftable})
        self.cost_mip = build_economic_milp(instance, alpha, fixed_starts=probe, peak_cap=0.0)
        lay = self.cost_mip.lp.layout
        self.c_bal = np.array(lay.rows["load-balance"])
        self.c_cap = np.array(lay.rows["grid-cap"])
        self.c_solver = SimplexSolver(self.cost_mip.lp, tol)
        self.peak_mip = build_min_peak_mip(instance, probe)
        lay = self.peak_mip.lp.layout
        self.p_bal = np.array(lay.rows["load-balance"])
        self.p_cost = lay.rows["cost-limit"][0]
        self.p_solver = SimplexSolver(self.peak_mip.lp, tol)
        self.P = instance.prices.grid_price
        self.T = T
        # every later solve restarts from these bases, so a result depends only on its data
        b = self.cost_mip.lp.b.copy()
        b[self.c_cap] = self.uncapped(b[self.c_bal])
        for b0, solver in ((b, self.c_solver), (self.peak_mip.lp.b, self.p_solver)):
            solver.set_rhs(b0)
            solver.solve()
            solver.pin_basis()

    def _solve(self, mip, solver, b):
        solver.set_rhs(b)
        solver.restart()
        out = solve_mip(mip, self.tol, solver=solver)
        if out.status is Status.INFEASIBLE:
            return None
        if out.status is not Status.OPTIMAL:
            # retry cold before giving up
            solver.set_basis(None)
            out = solve_mip(mip, self.tol, solver=solver)
            if out.status is Status.INFEASIBLE:
                return None
            if out.status is not Status.OPTIMAL:
                raise SolverFailure(f"dispatch model: {out.status.value} {out.message}")
        return out

    def dispatch(self, demand, cap=None):
        """Cheapest flows for ``demand`` under an optional grid cap; None if infeasible."""
        b = self.cost_mip.lp.b.copy()
        b[self.c_bal] = demand
        b[self.c_cap] = self.uncapped(demand) if cap is None else cap
        out = self._solve(self.cost_mip, self.c_solver, b)
        if out is None:
            return None
        flows = flows_from_solution(self.cost_mip.lp, out.x)
        cost = float(demand @ self.P + self.cost_mip.lp.c @ out.x)
        return cost, flows

    def uncapped(self, demand):
        return float(np.max(demand) + self.instance.ess.ch_rate * self.instance.dt + 1.0)

    def min_peak(self, demand, cost_limit=None):
        b = self.peak_mip.lp.b.copy()
        b[self.p_bal] = demand
        b[self.p_cost] = 1e12 if cost_limit is None else cost_limit - float(demand @ self.P)
        out = self._solve(self.peak_mip, self.p_solver, b)
        if out is None:
            return None
        return float(out.objective)


def cap_grid(hi, lo, levels):
    """``levels`` caps from ``hi`` down to ``lo`` inclusive (one cap when they coincide)."""
    if hi - lo <= 1e-9 * max(1.0, abs(hi)):
        return [hi]
    return [float(v) for v in np.linspace(hi, lo, levels)]


@dataclass
class _Candidate:
    key: tuple
    cap: float
    mo: float
    cost: float
    flows: FlowVector


@dataclass
class _Pruned:
    bound: float
    base: tuple


_MISSING = object()


class SmartSearch:
    """Enumerate-and-evaluate minimisation of the fractional MO objective."""

    def __init__(self, instance: Instance, alpha, weights: Weights, config: ScenarioConfig):
        self.instance, self.alpha, self.weights, self.config = instance, alpha, weights, config
        self.ev = DispatchEvaluator(instance, alpha, config.tol)
        self.cache = {}
        self.domains = {a.name: set(start_domain(instance, a, config.strict_utr)) for a in instance.shiftable}
        self.evaluations = 0

    def caps_for(self, demand, base=None):
        base = self.ev.dispatch(demand) if base is None else base
        if base is None:
            return None, []
        hi = float(np.max(base[1].grid_draw))
        lo = self.ev.min_peak(demand)
        lo = hi if lo is None else min(lo, hi)
        return base, cap_grid(hi, lo, self.config.cap_levels)

    def evaluate_key(self, key, cutoff=math.inf) -> _Candidate | None:
        """Best cap and MO of one start tuple.

        None when no cap gives a positive denominator, or when the tuple
        provably cannot reach an MO below ``cutoff``: capping only raises
        the cost and PAR is at least 1, so ``cost_uncapped / den(PAR=1)``
        bounds MO from below whenever that cost is non-negative.
        """
        hit = self.cache.get(key, _MISSING)
        if isinstance(hit, _Pruned):
            if hit.bound >= cutoff:
                return None
            base = hit.base
        elif hit is not _MISSING:
            return hit
        else:
            base = None
        inst = self.instance
        sched = ScheduleAssignment.from_key(inst, key)
        demand = appliance_demand(inst, sched)
        uc_raw, _ = user_convenience(inst, sched)
        wt = waiting_time(inst, sched)
        if base is None:
            self.evaluations += 1
            base = self.ev.dispatch(demand)
            if base is None:
                self.cache[key] = None
                return None
        try:
            bound = mo_value(base[0], uc_raw, 1.0, wt, self.weights)
        except NonPositiveDenominator:
            self.cache[key] = None
            return None
        if base[0] >= 0.0 and bound >= cutoff:
            self.cache[key] = _Pruned(bound, base)
            return None
        _, caps = self.caps_for(demand, base)
        best = None
        for k, cap in enumerate(caps):
            got = base if k == 0 else self.ev.dispatch(demand, cap)
            if got is None:
                continue
            cost, flows = got
            try:
                mo = mo_value(cost, uc_raw, par(np.maximum(flows.grid_draw, 0.0)), wt, self.weights)
            except NonPositiveDenominator:
                continue
            # ties go to the lower cap
            if best is None or mo < best.mo - 1e-12 or (mo <= best.mo + 1e-12 and cap < best.cap):
                best = _Candidate(key, cap, mo, cost, flows)
        self.cache[key] = best
        return best

    @staticmethod
    def better(a: _Candidate | None, b: _Candidate | None):
        """True when ``a`` beats ``b`` (lower MO; ties by key, then cap)."""
        if a is None:
            return False
        if b is None:
            return True
        if a.mo < b.mo - 1e-12:
            return True
        if a.mo > b.mo + 1e-12:
            return False
        return (a.key, a.cap) < (b.key, b.cap)

    def tuple_count(self):
        return math.prod(len(d) for d in self.domains.values()) if self.domains else 1

    def exhaustive(self):
        inst = self.instance
        names = [a.name for a in inst.shiftable]
        best = None
        for key in itertools.product(*[sorted(self.domains[n]) for n in names]):
            if not _schedule_ok(inst, dict(zip(names, key)), self.domains):
                continue
            cand = self.evaluate_key(key, math.inf if best is None else best.mo - 1e-12)
            if self.better(cand, best):
                best = cand
        return best

    def _moves(self):
        r = self.config.radius
        return list(range(-r, 0)) + list(range(1, r + 1))

    def _apply(self, key, shifts):
        names = [a.name for a in self.instance.shiftable]
        start = dict(zip(names, key))
        for name, delta in shifts:
            start[name] += delta
        for name, _ in shifts:
            start = self._repair(start, name)
            if start is None:
                return None
        k = tuple(start[n] for n in names)
        return None if k == key else k

    def neighbours(self, key):
        """Keys reachable by moving one appliance by at most ``radius`` slots."""
        out = []
        for a in self.instance.shiftable:
            for delta in self._moves():
                k = self._apply(key, [(a.name, delta)])
                if k is not None:
                    out.append(k)
        return out

    def pair_neighbours(self, key):
        """Keys reachable by moving two appliances at once."""
        names = [a.name for a in self.instance.shiftable]
        out, seen = [], set()
        for i, j in itertools.combinations(range(len(names)), 2):
            for di in self._moves():
                for dj in self._moves():
                    k = self._apply(key, [(names[i], di), (names[j], dj)])
                    if k is not None and k not in seen:
                        seen.add(k)
                        out.append(k)
        return out

    def _repair(self, start, moved):
        """Restore the consecutive rules after ``moved`` changed, pushing others away from it."""
        inst = self.instance
        for _ in range(len(inst.consecutive) + 1):
            changed = False
            for c in inst.consecutive:
                j = inst.appliance(c.predecessor)
                need = start[c.predecessor] + j.lot + c.min_delay
                if need > start[c.successor]:
                    if c.successor == moved:
                        start[c.predecessor] = start[c.successor] - j.lot - c.min_delay
                    else:
                        start[c.successor] = need
                    changed = True
            if not changed:
                break
        return start if _schedule_ok(inst, start, self.domains) else None

    def _best_of(self, keys, cutoff=math.inf):
        step = None
        for k in keys:
            cand = self.evaluate_key(k, cutoff)
            if self.better(cand, step):
                step = cand
        return step

    def local_search(self, seeds):
        """Best-improvement descent; pair moves are tried when single moves stall.

        Among seeds a later one replaces an earlier one only when strictly better.
        """
        best = None
        for k in seeds:
            cand = self.evaluate_key(k)
            if cand is not None and (best is None or cand.mo < best.mo - 1e-12):
                best = cand
        if best is None:
            return None
        for _ in range(self.config.max_passes):
            cutoff = best.mo - 1e-12
            step = self._best_of(self.neighbours(best.key), cutoff)
            if (step is None or not step.mo < cutoff) and self.config.pair_moves:
                step = self._best_of(self.pair_neighbours(best.key), cutoff)
            if step is None or not step.mo < best.mo - 1e-12:
                break
            best = step
        return best


class CostSearch(SmartSearch):
    """Local search on schedules for the cheapest uncapped dispatch."""

    def evaluate_key(self, key, cutoff=math.inf):
        hit = self.cache.get(key, _MISSING)
        if hit is not _MISSING:
            return hit
        sched = ScheduleAssignment.from_key(self.instance, key)
        self.evaluations += 1
        got = self.ev.dispatch(appliance_demand(self.instance, sched))
        best = None if got is None else _Candidate(key, math.inf, got[0], got[0], got[1])
        self.cache[key] = best
        return best


def _cheapest_starts(instance, domains):
    """Each appliance at its cheapest window that still leaves room for the consecutive rules."""
    P = instance.prices.grid_price
    order = _topological(instance)
    latest = {n: max(domains[n], default=-1) for n in order}
    for name in reversed(order):
        a = instance.appliance(name)
        for c in instance.consecutive:
            if c.predecessor == name:
                latest[name] = min(latest[name], latest[c.successor] - a.lot - c.min_delay)
    start = {}
    for name in order:
        a = instance.appliance(name)
        earliest = max([start[c.predecessor] + instance.appliance(c.predecessor).lot + c.min_delay
                        for c in instance.consecutive if c.successor == name], default=0)
        dom = [s for s in sorted(domains[name]) if earliest <= s <= latest[name]]
        if not dom:
            return None
        start[name] = min(dom, key=lambda s: (float(P[s:s + a.lot].sum()), s))
    return start


def _economic_incumbent(instance, alpha, mip, config):
    """A feasible point of the economic MILP from a cost local search, or None."""
    search = CostSearch(instance, alpha, instance.weights, replace(config, radius=instance.T, pair_moves=False))
    names = [a.name for a in instance.shiftable]
    seeds = []
    for make in (lambda: _cheapest_starts(instance, search.domains), lambda: normal_starts(instance).start):
        try:
            st = make()
        except ScheduleInfeasible:
            continue
        if st is not None and _schedule_ok(instance, st, search.domains):
            seeds.append(tuple(st[n] for n in names))
    best = search.local_search(seeds)
    if best is None:
        return None
    lb, ub = mip.lp.lb.copy(), mip.lp.ub.copy()
    for name, s in zip(names, best.key):
        slots, cols = mip.lp.layout.starts[name]
        ub[cols] = 0.0
        lb[cols] = 0.0
        hit = cols[slots == s]
        lb[hit] = ub[hit] = 1.0
    fixed = MipProblem(mip.lp.with_bounds(lb, ub), mip.integral)
    out = solve_mip(fixed, config.tol)
    return out.x if out.status is Status.OPTIMAL else None


def run_smart(instance: Instance, alpha=None, weights: Weights | None = None,
              config: ScenarioConfig | None = None, seeds=()) -> DaySolution:
    """Minimise cost / (w1*UC - w2*PAR - w3*WT) over schedules and grid caps.

    ``seeds`` are extra start schedules (mappings or keys) the local search
    starts from besides the economic and normal ones; on an exact MO tie
    the earliest seed is kept.
    """
    _check_valid(instance)
    config = config or ScenarioConfig(SMART)
    alpha = (instance.alpha if config.alpha is None else config.alpha) if alpha is None else alpha
    weights = weights or config.weights or instance.weights
    if weights.check():
        raise ValueError("invalid weights: " + "; ".join(weights.check()))
    search = SmartSearch(instance, alpha, weights, config)
    if search.tuple_count() <= config.exhaustive_limit:
        best = search.exhaustive()
        mode = "exhaustive"
    else:
        names = [a.name for a in instance.shiftable]
        extra = [tuple(k[n] for n in names) if not isinstance(k, tuple) else k for k in seeds]
        seeds = list(extra)
        econ = run_economic(instance, alpha, ScenarioConfig(ECONOMIC, tol=config.tol, strict_utr=config.strict_utr))
        seeds.append(tuple(econ.schedule[n] for n in names))
        try:
            seeds.append(normal_starts(instance).key(instance))
        except ScheduleInfeasible:
            pass
        best = search.local_search([k for k in seeds if _schedule_ok(instance, dict(zip(names, k)),
                                                                      search.domains)])
        mode = "local-search"
    if best is None:
        raise NonPositiveDenominator(message="no schedule and grid cap gives a positive MO denominator; "
                                             "adjust the weights")
    sched = ScheduleAssignment.from_key(instance, best.key)
    return _solution(instance, sched, best.flows, alpha, weights, SMART, peak_cap=best.cap,
                     info={"search": mode, "evaluated_schedules": search.evaluations})


def weight_sweep(instance: Instance, alpha, weight_list, config: ScenarioConfig | None = None):
    """One smart run per weight triple, each seeded with the previous schedule."""
    out, seeds = [], []
    for w in weight_list:
        if not isinstance(w, Weights):
            w = Weights(*w)
        sol = run_smart(instance, alpha, w, config, seeds=seeds)
        out.append(sol)
        seeds = [sol.schedule.key(instance)]
    return out


def alpha_sweep(instance: Instance, alphas, weights: Weights | None = None,
                config: ScenarioConfig | None = None):
    """One smart run per selling factor, each seeded with the previous schedule."""
    out, seeds = [], []
    for a in alphas:
        sol = run_smart(instance, float(a), weights, config, seeds=seeds)
        out.append(sol)
        seeds = [sol.schedule.key(instance)]
    return out


def check_solution(instance: Instance, sol: DaySolution, tol=1e-6):
    """Every schedule and flow invariant breach of a returned solution."""
    errs = list(sol.schedule.violations(instance))
    demand = appliance_demand(instance, sol.schedule)
    if sol.scenario == NORMAL:
        pv = np.zeros(instance.T)
    else:
        pv = res_energy(instance.res, instance.grid)
    errs += sol.flows.violations(instance, demand, pv, tol)
    return errs
