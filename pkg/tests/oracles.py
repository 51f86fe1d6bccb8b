"""Independent reference implementations used only by the tests.

Everything here is rebuilt from the model definitions with scipy/HiGHS
and itertools, without going through hemsopt.formulation or the
in-house simplex.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from hemsopt.model import (ConsecutiveConstraint, EssParams, Instance, NonShiftableAppliance, PriceProfile,
                           ResProfile, ShiftableAppliance, TimeGrid, Weights)

# frozen from the reference program run with CBC on the 24 printed prices and the
# storage parameters (eta 0.95, levels 0.5/0.5/10, rates 1 kW, 1 h slots)
REFERENCE_ARBITRAGE_MIN = -63.51725000000002

REFERENCE_PRICES = [10, 10, 8.5, 9, 12, 9.2, 12.2, 24.5, 27, 27.5, 17.2, 16.5, 16.5, 16.2, 14, 9,
                8.5, 8.7, 9.5, 8, 8.2, 8, 8.1, 8.1]


def arbitrage_highs(prices, eta, rate, el0, el_min, el_max, dt=1.0):
    """Storage-only price arbitrage MIP solved by HiGHS."""
    P = np.asarray(prices, dtype=float)
    T = P.size
    # columns: charge, discharge, level, mode
    n = 4 * T
    c = np.concatenate([P, -P, np.zeros(2 * T)])
    rows, lo, hi = [], [], []
    for t in range(T):
        r = np.zeros(n)
        r[t], r[3 * T + t] = 1.0, -rate * dt
        rows.append(r), lo.append(-np.inf), hi.append(0.0)
        r = np.zeros(n)
        r[T + t], r[3 * T + t] = 1.0, rate * dt
        rows.append(r), lo.append(-np.inf), hi.append(rate * dt)
        r = np.zeros(n)
        r[2 * T + t] = 1.0
        r[t], r[T + t] = -eta, 1.0 / eta
        if t > 0:
            r[2 * T + t - 1] = -1.0
        rows.append(r), lo.append(el0 if t == 0 else 0.0), hi.append(el0 if t == 0 else 0.0)
    lb = np.concatenate([np.zeros(2 * T), np.full(T, el_min), np.zeros(T)])
    ub = np.concatenate([np.full(2 * T, np.inf), np.full(T, el_max), np.ones(T)])
    lb[3 * T - 1] = ub[3 * T - 1] = el0
    integ = np.concatenate([np.zeros(3 * T), np.ones(T)])
    res = milp(c, constraints=LinearConstraint(np.array(rows), lo, hi), bounds=Bounds(lb, ub),
               integrality=integ, options={"mip_rel_gap": 0})
    assert res.status == 0, res.message
    return float(res.fun)


def dispatch_highs(inst: Instance, demand, alpha, cap=None, minimize="cost", cost_limit=None,
                   modes=None):
    """Cheapest (or lowest-peak) storage/PV/grid dispatch for a fixed demand.

    Returns ``(objective, flows)`` with flows a dict of per-slot arrays,
    or None when infeasible. ``modes`` fixes the charge/discharge modes
    and turns the problem into an LP.
    """
    T, dt = inst.T, inst.dt
    e = inst.ess
    P = inst.prices.grid_price
    res = inst.res.values * (inst.res.area_s * inst.res.eta_res * dt if inst.res.ghi is not None else 1.0)
    names = ["res_load", "res_charge", "mg_charge", "mg_load", "ess_load", "ess_selling", "level", "mode"]
    col = {k: i * T for i, k in enumerate(names)}
    n = len(names) * T + 1  # last column is the peak
    z = n - 1
    cost = np.zeros(n)
    cost[col["mg_charge"]:col["mg_charge"] + T] = P
    cost[col["mg_load"]:col["mg_load"] + T] = P
    cost[col["ess_selling"]:col["ess_selling"] + T] = -alpha * P
    rows, lo, hi = [], [], []

    def add(coefs, lower, upper):
        r = np.zeros(n)
        for (k, t), v in coefs.items():
            r[z if k == "peak" else col[k] + t] += v
        rows.append(r), lo.append(lower), hi.append(upper)

    for t in range(T):
        add({("mg_load", t): 1, ("res_load", t): 1, ("ess_load", t): 1}, demand[t], demand[t])
        add({("res_load", t): 1, ("res_charge", t): 1}, -np.inf, res[t])
        lvl = {("level", t): 1, ("res_charge", t): -e.eta_ess, ("mg_charge", t): -e.eta_ess,
               ("ess_load", t): 1 / e.eta_ess, ("ess_selling", t): 1 / e.eta_ess}
        if t > 0:
            lvl[("level", t - 1)] = -1
        add(lvl, e.el0 if t == 0 else 0.0, e.el0 if t == 0 else 0.0)
        add({("res_charge", t): 1, ("mg_charge", t): 1, ("mode", t): -e.ch_rate * dt}, -np.inf, 0.0)
        add({("ess_load", t): 1, ("ess_selling", t): 1, ("mode", t): e.dh_rate * dt}, -np.inf, e.dh_rate * dt)
        if cap is not None:
            add({("mg_load", t): 1, ("mg_charge", t): 1}, -np.inf, cap)
        add({("mg_load", t): 1, ("mg_charge", t): 1, ("peak", 0): -1}, -np.inf, 0.0)
    if cost_limit is not None:
        rows.append(cost.copy()), lo.append(-np.inf), hi.append(cost_limit)
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    lb[col["level"]:col["level"] + T] = e.el_min
    ub[col["level"]:col["level"] + T] = e.el_max
    lb[col["level"] + T - 1] = ub[col["level"] + T - 1] = e.el0
    ub[col["mode"]:col["mode"] + T] = 1.0
    if modes is not None:
        lb[col["mode"]:col["mode"] + T] = ub[col["mode"]:col["mode"] + T] = modes
    obj = cost if minimize == "cost" else np.eye(n)[z]
    integ = np.zeros(n)
    if modes is None:
        integ[col["mode"]:col["mode"] + T] = 1
    A = np.array(rows)
    if modes is None:
        out = milp(obj, constraints=LinearConstraint(A, lo, hi), bounds=Bounds(lb, ub), integrality=integ,
                   options={"mip_rel_gap": 0})
        if out.status != 0:
            return None
        x = out.x
        val = float(out.fun)
    else:
        lo_a, hi_a = np.array(lo), np.array(hi)
        eq = lo_a == hi_a
        ub_rows = ~eq & np.isfinite(hi_a)
        out = linprog(obj, A_ub=A[ub_rows], b_ub=hi_a[ub_rows], A_eq=A[eq], b_eq=hi_a[eq],
                      bounds=list(zip(lb, ub)), method="highs")
        if out.status != 0:
            return None
        x = out.x
        val = float(out.fun)
    flows = {k: x[col[k]:col[k] + T] for k in names}
    return val, flows


def on_matrix(inst, starts):
    O = np.zeros((len(inst.shiftable), inst.T))
    for k, (a, s) in enumerate(zip(inst.shiftable, starts)):
        O[k, s:s + a.lot] = 1
    return O


def total_demand(inst, starts):
    base = sum((b.pr * b.on * inst.dt for b in inst.non_shiftable), np.zeros(inst.T))
    pr = np.array([a.pr * inst.dt for a in inst.shiftable])
    return base + (pr @ on_matrix(inst, starts) if pr.size else 0.0)


def start_tuples(inst):
    """Every start tuple respecting the day length and the consecutive rules."""
    names = [a.name for a in inst.shiftable]
    ranges = [range(0, inst.T - a.lot + 1) for a in inst.shiftable]
    for key in itertools.product(*ranges):
        s = dict(zip(names, key))
        if all(s[c.predecessor] + inst.appliance(c.predecessor).lot + c.min_delay <= s[c.successor]
               for c in inst.consecutive):
            yield key


def uc_trapezoid(t, utr, btr):
    us, ue = utr
    bs, be = btr
    if bs <= t <= be:
        return 1.0
    if us < t < bs:
        return (t - us) / (bs - us)
    if be < t < ue:
        return (ue - t) / (ue - be)
    return 0.0


def uc_raw(inst, starts):
    return sum(a.pri * sum(uc_trapezoid(t, a.utr, a.btr) for t in range(s, s + a.lot))
               for a, s in zip(inst.shiftable, starts))


def wt(inst, starts):
    s = {a.name: v for a, v in zip(inst.shiftable, starts)}
    return sum(s[c.successor] - s[c.predecessor] - inst.appliance(c.predecessor).lot - c.min_delay
               for c in inst.consecutive)


def par(draw):
    draw = np.maximum(np.asarray(draw, dtype=float), 0.0)
    return 1.0 if draw.mean() == 0 else float(draw.max() / draw.mean())


def brute_economic(inst, alpha=None):
    alpha = inst.alpha if alpha is None else alpha
    best = np.inf
    for key in start_tuples(inst):
        got = dispatch_highs(inst, total_demand(inst, key), alpha)
        if got is not None:
            best = min(best, got[0])
    return best


def brute_economic_modes(inst, alpha=None):
    """Like :func:`brute_economic` but enumerating every mode pattern with an LP inside."""
    alpha = inst.alpha if alpha is None else alpha
    best = np.inf
    for key in start_tuples(inst):
        d = total_demand(inst, key)
        for modes in itertools.product((0.0, 1.0), repeat=inst.T):
            got = dispatch_highs(inst, d, alpha, modes=np.array(modes))
            if got is not None:
                best = min(best, got[0])
    return best


def brute_smart(inst, alpha, weights: Weights | None, levels):
    """Minimum MO over all start tuples and, per tuple, the cap grid between its
    cost-optimal peak and its lowest achievable peak."""
    w1, w2, w3 = (1.0, 1.0, 1.0) if weights is None else weights.as_tuple()
    best = np.inf
    for key in start_tuples(inst):
        d = total_demand(inst, key)
        base = dispatch_highs(inst, d, alpha)
        if base is None:
            continue
        draw = base[1]["mg_load"] + base[1]["mg_charge"]
        top = float(draw.max())
        low = dispatch_highs(inst, d, alpha, minimize="peak")
        low = top if low is None else min(low[0], top)
        caps = [top] if top - low <= 1e-9 * max(1.0, abs(top)) else list(np.linspace(top, low, levels))
        u, w = uc_raw(inst, key), wt(inst, key)
        for k, cap in enumerate(caps):
            got = base if k == 0 else dispatch_highs(inst, d, alpha, cap=cap)
            if got is None:
                continue
            draw = got[1]["mg_load"] + got[1]["mg_charge"]
            den = w1 * u - w2 * par(draw) - w3 * w
            if den > 0:
                best = min(best, got[0] / den)
    return best


def random_toy(rng: np.random.Generator, n_app=None, T=6) -> Instance:
    """Small random instance; prices carry many digits so optima are unique."""
    dt = 24.0 / T
    n_app = int(rng.integers(2, 4)) if n_app is None else n_app
    prices = np.round(rng.uniform(5.0, 30.0, T), 4)
    res = ResProfile(energy=np.round(rng.uniform(0.0, 1.5, T) * (rng.random(T) < 0.6), 4))
    el_min = round(float(rng.uniform(0.0, 0.5)), 3)
    el_max = el_min + round(float(rng.uniform(0.5, 4.0)), 3)
    el0 = round(float(rng.uniform(el_min, el_max)), 3)
    ess = EssParams(round(float(rng.uniform(0.8, 0.99)), 3), round(float(rng.uniform(0.0, 0.4)), 3),
                    round(float(rng.uniform(0.0, 0.4)), 3), el0, el_min, el_max)
    apps = []
    for k in range(n_app):
        lot = int(rng.integers(1, 3))
        pts = np.sort(rng.integers(0, T, 4))
        apps.append(ShiftableAppliance(f"A{k}", round(float(rng.uniform(0.1, 1.0)), 3), lot,
                                       (int(pts[0]), int(pts[3])), (int(pts[1]), int(pts[2])),
                                       int(rng.integers(1, 4))))
    base = NonShiftableAppliance("base", round(float(rng.uniform(0.01, 0.2)), 3),
                                 (rng.random(T) < 0.7).astype(float))
    cons = []
    if n_app >= 2 and rng.random() < 0.6:
        cons.append(ConsecutiveConstraint("A0", "A1", int(rng.integers(0, 2))))
    return Instance(TimeGrid(T, dt), PriceProfile(prices, round(float(rng.uniform(0.5, 1.0)), 3)), res, ess,
                    tuple(apps), (base,), tuple(cons))
