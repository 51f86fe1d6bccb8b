"""Matrix builders: every constraint row of the scheduling models lives here.

Column layout for the dispatch part is group-major: column ``g*T + t``
holds flow group ``g`` in slot ``t``. Start binaries ``x[a, s]`` (one per
appliance and admissible start) follow the dispatch block.

Each row carries a tag naming the physical rule it encodes; see
:func:`audit` for the list.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lpsolve import LinearProgram, MipProblem
from .model import (EssParams, Instance, PriceProfile, ScheduleAssignment, TimeGrid,
                    appliance_demand, nonshiftable_demand, res_energy)

DISPATCH_GROUPS = ("res_load", "res_charge", "mg_charge", "mg_load",
                   "ess_load", "ess_selling", "level")

ROW_RULES = {
    "load-balance": "grid + PV + storage supply equals appliance demand",
    "pv-use": "PV energy used for load and charging does not exceed PV output",
    "storage-level": "level(t) = level(t-1) + eta*charge - discharge/eta",
    "charge-rate": "charge <= Ch_rate*dt*mode",
    "discharge-rate": "discharge <= Dh_rate*dt*(1-mode)",
    "terminal-level": "final storage level returns to EL0",
    "grid-cap": "grid draw E_LD(t) <= peak cap",
    "one-start": "each shiftable appliance starts exactly once",
    "consecutive": "successor start >= predecessor start + LoT + delay",
    "precedence": "disaggregated form of the consecutive rule, per slot",
    "peak-epigraph": "grid draw E_LD(t) <= peak variable",
    "cost-limit": "energy cost <= given limit",
}


@dataclass
class DispatchVariables:
    """Column and row index maps of a generated model."""

    T: int
    groups: dict
    starts: dict = field(default_factory=dict)
    rows: dict = field(default_factory=dict)
    peak: int | None = None

    def col(self, group, t):
        return self.groups[group][t]

    def extract(self, x, group):
        return np.asarray(x)[self.groups[group]]


class _Builder:
    def __init__(self):
        self.c, self.lb, self.ub, self.names, self.integral = [], [], [], [], []
        self.rows = []  # (coeff dict, sense, rhs, name, tag)

    def var(self, name, c=0.0, lb=0.0, ub=np.inf, integral=False):
        j = len(self.c)
        self.c.append(c)
        self.lb.append(lb)
        self.ub.append(ub)
        self.names.append(name)
        if integral:
            self.integral.append(j)
        return j

    def row(self, coeffs, sense, rhs, name, tag):
        self.rows.append((coeffs, sense, float(rhs), name, tag))
        return len(self.rows) - 1

    def build(self, offset=0.0):
        n, m = len(self.c), len(self.rows)
        A = np.zeros((m, n))
        for i, (coeffs, _, _, _, _) in enumerate(self.rows):
            for j, v in coeffs.items():
                A[i, j] += v
        return LinearProgram(self.c, A, [r[1] for r in self.rows], [r[2] for r in self.rows],
                             self.lb, self.ub, offset=offset, var_names=self.names,
                             row_names=[r[3] for r in self.rows], row_tags=[r[4] for r in self.rows])


def _tagged(layout, tag, i):
    layout.rows.setdefault(tag, []).append(i)


def build_ess_arbitrage_mip(prices: PriceProfile, ess: EssParams, grid: TimeGrid) -> MipProblem:
    """Storage-only price arbitrage: min sum (charge - discharge) * price."""
    T, dt = grid.T, grid.dt
    P = prices.grid_price
    bld = _Builder()
    ch = [bld.var(f"charge[{t}]", P[t], 0.0, ess.ch_rate * dt) for t in range(T)]
    dh = [bld.var(f"discharge[{t}]", -P[t], 0.0, ess.dh_rate * dt) for t in range(T)]
    lv = [bld.var(f"level[{t}]", 0.0, ess.el_min, ess.el_max) for t in range(T)]
    md = [bld.var(f"mode[{t}]", 0.0, 0.0, 1.0, integral=True) for t in range(T)]
    layout = DispatchVariables(T, {"charge": np.array(ch), "discharge": np.array(dh),
                                   "level": np.array(lv), "mode": np.array(md)})
    for t in range(T):
        _tagged(layout, "charge-rate",
                bld.row({ch[t]: 1.0, md[t]: -ess.ch_rate * dt}, "<=", 0.0, f"charge_rate[{t}]", "charge-rate"))
        _tagged(layout, "discharge-rate",
                bld.row({dh[t]: 1.0, md[t]: ess.dh_rate * dt}, "<=", ess.dh_rate * dt,
                        f"discharge_rate[{t}]", "discharge-rate"))
        coeffs = {lv[t]: 1.0, ch[t]: -ess.eta_ess, dh[t]: 1.0 / ess.eta_ess}
        if t > 0:
            coeffs[lv[t - 1]] = -1.0
        _tagged(layout, "storage-level",
                bld.row(coeffs, "=", ess.el0 if t == 0 else 0.0, f"level[{t}]", "storage-level"))
    _tagged(layout, "terminal-level",
            bld.row({lv[T - 1]: 1.0}, "=", ess.el0, "terminal_level", "terminal-level"))
    lp = bld.build()
    lp.layout = layout
    return MipProblem(lp, md)


def start_domain(instance: Instance, appliance, strict_utr=False):
    """Admissible start slots of one appliance."""
    hi = instance.T - appliance.lot
    lo = 0
    if strict_utr:
        lo = max(lo, appliance.utr[0])
        hi = min(hi, appliance.utr[1] - appliance.lot + 1)
    return list(range(lo, hi + 1))


def demand_ceiling(instance: Instance) -> np.ndarray:
    """Per-slot demand bound valid for every schedule."""
    return nonshiftable_demand(instance) + sum(a.pr * instance.dt for a in instance.shiftable)


def _dispatch_block(bld, instance, alpha, mode_fixed, demand_max):
    T, dt = instance.T, instance.dt
    P = instance.prices.grid_price
    ess = instance.ess
    E_res = res_energy(instance.res, instance.grid)
    cost = {"res_load": -P, "res_charge": np.zeros(T), "mg_charge": P, "mg_load": np.zeros(T),
            "ess_load": -P, "ess_selling": -alpha * P, "level": np.zeros(T)}
    ub = {"res_load": E_res, "res_charge": np.minimum(E_res, ess.ch_rate * dt),
          "mg_charge": np.full(T, ess.ch_rate * dt), "mg_load": demand_max,
          "ess_load": np.full(T, ess.dh_rate * dt), "ess_selling": np.full(T, ess.dh_rate * dt),
          "level": np.full(T, ess.el_max)}
    groups = {}
    for g in DISPATCH_GROUPS:
        lo = ess.el_min if g == "level" else 0.0
        groups[g] = np.array([bld.var(f"{g}[{t}]", cost[g][t], lo, ub[g][t]) for t in range(T)])
    if mode_fixed is None:
        groups["mode"] = np.array([bld.var(f"mode[{t}]", 0.0, 0.0, 1.0, integral=True) for t in range(T)])
    return groups, E_res


def _dispatch_rows(bld, layout, instance, mode_fixed, base_demand, shift_terms, peak_cap):
    """Rows shared by the dispatch LP and the scheduling MILP."""
    T, dt = instance.T, instance.dt
    ess = instance.ess
    g = layout.groups
    E_res = res_energy(instance.res, instance.grid)
    for t in range(T):
        coeffs = {g["mg_load"][t]: 1.0, g["res_load"][t]: 1.0, g["ess_load"][t]: 1.0}
        for j, v in shift_terms[t]:
            coeffs[j] = coeffs.get(j, 0.0) - v
        _tagged(layout, "load-balance",
                bld.row(coeffs, "=", base_demand[t], f"balance[{t}]", "load-balance"))
    for t in range(T):
        _tagged(layout, "pv-use",
                bld.row({g["res_load"][t]: 1.0, g["res_charge"][t]: 1.0}, "<=", E_res[t],
                        f"pv_use[{t}]", "pv-use"))
    for t in range(T):
        coeffs = {g["level"][t]: 1.0, g["res_charge"][t]: -ess.eta_ess, g["mg_charge"][t]: -ess.eta_ess,
                  g["ess_load"][t]: 1.0 / ess.eta_ess, g["ess_selling"][t]: 1.0 / ess.eta_ess}
        if t > 0:
            coeffs[g["level"][t - 1]] = -1.0
        _tagged(layout, "storage-level",
                bld.row(coeffs, "=", ess.el0 if t == 0 else 0.0, f"level[{t}]", "storage-level"))
    for t in range(T):
        ch = {g["res_charge"][t]: 1.0, g["mg_charge"][t]: 1.0}
        dh = {g["ess_load"][t]: 1.0, g["ess_selling"][t]: 1.0}
        if mode_fixed is None:
            ch[g["mode"][t]] = -ess.ch_rate * dt
            dh[g["mode"][t]] = ess.dh_rate * dt
            ch_rhs, dh_rhs = 0.0, ess.dh_rate * dt
        else:
            ch_rhs = ess.ch_rate * dt * mode_fixed[t]
            dh_rhs = ess.dh_rate * dt * (1.0 - mode_fixed[t])
        _tagged(layout, "charge-rate", bld.row(ch, "<=", ch_rhs, f"charge_rate[{t}]", "charge-rate"))
        _tagged(layout, "discharge-rate", bld.row(dh, "<=", dh_rhs, f"discharge_rate[{t}]", "discharge-rate"))
    _tagged(layout, "terminal-level",
            bld.row({g["level"][T - 1]: 1.0}, "=", ess.el0, "terminal_level", "terminal-level"))
    if peak_cap is not None:
        for t in range(T):
            _tagged(layout, "grid-cap",
                    bld.row({g["mg_load"][t]: 1.0, g["mg_charge"][t]: 1.0}, "<=", peak_cap,
                            f"grid_cap[{t}]", "grid-cap"))


def build_dispatch_lp(instance: Instance, schedule: ScheduleAssignment, modes, peak_cap=None,
                      alpha=None) -> LinearProgram:
    """Continuous dispatch for a fixed schedule and fixed storage modes."""
    alpha = instance.alpha if alpha is None else alpha
    T = instance.T
    modes = np.asarray(modes, dtype=float).ravel()
    if modes.size != T:
        raise ValueError(f"modes has {modes.size} entries, expected {T}")
    demand = appliance_demand(instance, schedule)
    bld = _Builder()
    groups, _ = _dispatch_block(bld, instance, alpha, modes, demand)
    layout = DispatchVariables(T, groups)
    _dispatch_rows(bld, layout, instance, modes, demand, [[] for _ in range(T)], peak_cap)
    lp = bld.build(offset=float(demand @ instance.prices.grid_price))
    lp.layout = layout
    return lp


def build_economic_milp(instance: Instance, alpha=None, *, fixed_starts: ScheduleAssignment | None = None,
                        peak_cap=None, strict_utr=False, strengthen=True) -> MipProblem:
    """Cost-minimising schedule and dispatch.

    With ``fixed_starts`` the appliance demand is moved to the right-hand
    side and only the storage modes remain integral; this is the inner
    model of the smart-scenario search.
    """
    alpha = instance.alpha if alpha is None else alpha
    T, dt = instance.T, instance.dt
    P = instance.prices.grid_price
    E_N = nonshiftable_demand(instance)
    bld = _Builder()
    dmax = demand_ceiling(instance)
    if fixed_starts is not None:
        base = appliance_demand(instance, fixed_starts)
        groups, _ = _dispatch_block(bld, instance, alpha, None, dmax)
        layout = DispatchVariables(T, groups)
        _dispatch_rows(bld, layout, instance, None, base, [[] for _ in range(T)], peak_cap)
        lp = bld.build(offset=float(base @ P))
        lp.layout = layout
        return MipProblem(lp, list(groups["mode"]))

    groups, _ = _dispatch_block(bld, instance, alpha, None, dmax)
    layout = DispatchVariables(T, groups)
    shift_terms = [[] for _ in range(T)]
    starts = {}
    for a in instance.shiftable:
        slots = start_domain(instance, a, strict_utr)
        cols = []
        for s in slots:
            j = bld.var(f"start[{a.name},{s}]", a.pr * dt * float(P[s:s + a.lot].sum()),
                        0.0, 1.0, integral=True)
            cols.append(j)
            for t in range(s, s + a.lot):
                shift_terms[t].append((j, a.pr * dt))
        starts[a.name] = (np.array(slots), np.array(cols))
    layout.starts = starts
    _dispatch_rows(bld, layout, instance, None, E_N, shift_terms, peak_cap)
    for a in instance.shiftable:
        _, cols = starts[a.name]
        _tagged(layout, "one-start",
                bld.row({int(j): 1.0 for j in cols}, "=", 1.0, f"one_start[{a.name}]", "one-start"))
    for c in instance.consecutive:
        pj = instance.appliance(c.predecessor)
        sj, cj = starts[c.predecessor]
        si, ci = starts[c.successor]
        coeffs = {}
        for s, j in zip(si, ci):
            coeffs[int(j)] = coeffs.get(int(j), 0.0) + float(s)
        for s, j in zip(sj, cj):
            coeffs[int(j)] = coeffs.get(int(j), 0.0) - float(s)
        need = pj.lot + c.min_delay
        _tagged(layout, "consecutive",
                bld.row(coeffs, ">=", need, f"consecutive[{c.predecessor},{c.successor}]", "consecutive"))
        if strengthen:
            # successor started by slot u needs the predecessor started by u - need
            for u in si:
                lhs = {int(j): 1.0 for s, j in zip(si, ci) if s <= u}
                for s, j in zip(sj, cj):
                    if s <= u - need:
                        lhs[int(j)] = lhs.get(int(j), 0.0) - 1.0
                _tagged(layout, "precedence",
                        bld.row(lhs, "<=", 0.0, f"precedence[{c.predecessor},{c.successor},{u}]",
                                "precedence"))
    lp = bld.build(offset=float(E_N @ P))
    lp.layout = layout
    integral = list(groups["mode"]) + [int(j) for a in instance.shiftable for j in starts[a.name][1]]
    sets = [tuple(int(j) for j in starts[a.name][1]) for a in instance.shiftable]
    return MipProblem(lp, integral, tuple(sets))


def build_min_peak_mip(instance: Instance, schedule: ScheduleAssignment, cost_limit=None) -> MipProblem:
    """Smallest achievable grid peak for a fixed schedule, optionally under a cost limit."""
    T = instance.T
    demand = appliance_demand(instance, schedule)
    P = instance.prices.grid_price
    bld = _Builder()
    groups, _ = _dispatch_block(bld, instance, instance.alpha, None, demand_ceiling(instance))
    layout = DispatchVariables(T, groups)
    _dispatch_rows(bld, layout, instance, None, demand, [[] for _ in range(T)], None)
    cost_coeffs = {int(j): bld.c[int(j)] for g in DISPATCH_GROUPS for j in groups[g] if bld.c[int(j)] != 0.0}
    for j in cost_coeffs:
        bld.c[j] = 0.0
    z = bld.var("peak", 1.0, 0.0, float(demand_ceiling(instance).max() + instance.ess.ch_rate * instance.dt) + 1.0)
    layout.peak = z
    for t in range(T):
        _tagged(layout, "peak-epigraph",
                bld.row({groups["mg_load"][t]: 1.0, groups["mg_charge"][t]: 1.0, z: -1.0}, "<=", 0.0,
                        f"peak[{t}]", "peak-epigraph"))
    limit = 1e12 if cost_limit is None else cost_limit - float(demand @ P)
    _tagged(layout, "cost-limit", bld.row(cost_coeffs, "<=", limit, "cost_limit", "cost-limit"))
    lp = bld.build()
    lp.layout = layout
    return MipProblem(lp, list(groups["mode"]))


def flows_from_solution(lp: LinearProgram, x, modes=None):
    """Read a FlowVector out of a dispatch solution vector."""
    from .model import FlowVector
    layout = lp.layout
    x = np.asarray(x, dtype=float)
    vals = {g: np.maximum(layout.extract(x, g), 0.0) for g in DISPATCH_GROUPS if g != "level"}
    level = layout.extract(x, "level")
    if modes is None:
        modes = np.round(layout.extract(x, "mode"))
    return FlowVector(vals["res_load"], vals["res_charge"], vals["mg_charge"], vals["mg_load"],
                      vals["ess_load"], vals["ess_selling"], np.asarray(modes, dtype=float), level)


def starts_from_solution(instance: Instance, lp: LinearProgram, x) -> ScheduleAssignment:
    start = {}
    for a in instance.shiftable:
        slots, cols = lp.layout.starts[a.name]
        start[a.name] = int(slots[int(np.argmax(np.asarray(x)[cols]))])
    return ScheduleAssignment(start)


def audit(lp: LinearProgram):
    """List ``(row name, tag, rule)`` for every row; raises if a row is untagged."""
    out = []
    for name, tag in zip(lp.row_names, lp.row_tags):
        if tag not in ROW_RULES:
            raise ValueError(f"row {name!r} has no known rule tag ({tag!r})")
        out.append((name, tag, ROW_RULES[tag]))
    return out


def write_model(lp: LinearProgram, path):
    """Write the text matrix dump of ``lp`` to ``path``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(lp.dump())
