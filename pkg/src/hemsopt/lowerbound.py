"""Closed-form lower bound on the daily energy cost.

The bound adds four separately computable terms: the fixed cost of the
non-shiftable load, the cheapest price window of every shiftable
appliance, the best storage arbitrage result and (subtracted) the value
of all PV output at grid price. The window term ignores UTR and
consecutive rules, which is why the bound can be strict.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formulation import build_ess_arbitrage_mip
from .lpsolve import Status, ToleranceSettings, solve_mip
from .model import Instance, nonshiftable_demand, res_energy


@dataclass(frozen=True)
class LowerBoundBreakdown:
    nonshiftable_cost: float
    shiftable_min_cost: float
    c_mip_min: float
    res_benefit: float
    total_bound: float
    best_starts: dict
    tight_possible: bool


def min_window_cost(prices, lot):
    """Cheapest sum of ``lot`` consecutive prices and its earliest start."""
    P = np.asarray(getattr(prices, "grid_price", prices), dtype=float)
    T = P.size
    if not 1 <= lot <= T:
        raise ValueError(f"lot={lot} outside 1..{T}")
    sums = np.convolve(P, np.ones(lot), mode="valid")
    s = int(np.argmin(sums))
    return float(sums[s]), s


def res_benefit(energy, prices) -> float:
    e = np.asarray(energy, dtype=float)
    P = np.asarray(getattr(prices, "grid_price", prices), dtype=float)
    if e.size != P.size:
        raise ValueError("PV energy and price vectors differ in length")
    return float(e @ P)


def lower_bound(instance: Instance, alpha=None, tol: ToleranceSettings | None = None) -> LowerBoundBreakdown:
    alpha = instance.alpha if alpha is None else alpha
    P = instance.prices.grid_price
    dt = instance.dt
    ns = float(nonshiftable_demand(instance) @ P)
    sh = 0.0
    starts = {}
    for a in instance.shiftable:
        m, s = min_window_cost(P, a.lot)
        sh += a.pr * dt * m
        starts[a.name] = s
    out = solve_mip(build_ess_arbitrage_mip(instance.prices, instance.ess, instance.grid), tol)
    if out.status is not Status.OPTIMAL:
        raise RuntimeError(f"storage arbitrage model not solved: {out.status.value} {out.message}")
    cmip = float(out.objective)
    rb = res_benefit(res_energy(instance.res, instance.grid), P)
    total = ns + sh + cmip - rb
    # equality needs alpha = 1 and the window minima to respect the consecutive rules
    ordered = all(starts[c.predecessor] + instance.appliance(c.predecessor).lot + c.min_delay
                  <= starts[c.successor] for c in instance.consecutive)
    return LowerBoundBreakdown(ns, sh, cmip, rb, total, starts, bool(alpha == 1.0 and ordered))
