"""Evaluators for cost, convenience, peak-to-average ratio, waiting time and MO."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import FlowVector, Instance, ScheduleAssignment, ShiftableAppliance, Weights, appliance_demand


class NonPositiveDenominator(ValueError):
    """MO denominator ``w1*UC - w2*PAR - w3*WT`` is zero or negative."""

    def __init__(self, uc_term=float("nan"), par_term=float("nan"), wt_term=float("nan"), message=None):
        self.uc_term, self.par_term, self.wt_term = uc_term, par_term, wt_term
        if message is None:
            message = (f"MO denominator is not positive: {uc_term:g} - {par_term:g} - {wt_term:g}"
                       f" = {uc_term - par_term - wt_term:g}; adjust the weights")
        super().__init__(message)


def uc_value(t, a: ShiftableAppliance) -> float:
    """Trapezoidal convenience of running ``a`` in slot ``t``."""
    us, ue = a.utr
    bs, be = a.btr
    if bs <= t <= be:
        return 1.0
    if t <= us or t >= ue:
        return 0.0
    if t < bs:
        return (t - us) / (bs - us)
    return (t - ue) / (be - ue)


def uc_curve(a: ShiftableAppliance, T) -> np.ndarray:
    return np.array([uc_value(t, a) for t in range(T)])


def uc_max(instance: Instance) -> float:
    return float(sum(a.pri * a.lot for a in instance.shiftable))


def user_convenience(instance: Instance, schedule: ScheduleAssignment):
    """Return ``(uc_raw, uc_index_percent)``."""
    O = schedule.on_matrix(instance)
    raw = 0.0
    for k, a in enumerate(instance.shiftable):
        raw += a.pri * float(uc_curve(a, instance.T) @ O[k])
    top = uc_max(instance)
    return raw, (100.0 * raw / top if top > 0 else 100.0)


def par(grid_draw) -> float:
    """Peak over mean of the grid draw; 1 for an all-zero draw."""
    d = np.asarray(grid_draw, dtype=float)
    if np.any(d < 0):
        raise ValueError("grid draw entries must be >= 0")
    mean = d.mean()
    if mean == 0.0:
        return 1.0
    return float(d.max() / mean)


def waiting_time(instance: Instance, schedule: ScheduleAssignment) -> float:
    total = 0
    for c in instance.consecutive:
        j = instance.appliance(c.predecessor)
        slack = schedule[c.successor] - schedule[c.predecessor] - j.lot - c.min_delay
        if slack < 0:
            raise ValueError(f"{c.predecessor}->{c.successor} violates the consecutive rule")
        total += slack
    return float(total)


def slot_costs(instance: Instance, schedule: ScheduleAssignment, flows: FlowVector, alpha=None):
    """EC(t) per slot."""
    alpha = instance.alpha if alpha is None else alpha
    P = instance.prices.grid_price
    demand = appliance_demand(instance, schedule)
    e_ld = demand + flows.mg_charge - flows.res_load - flows.ess_load
    return e_ld * P - flows.ess_selling * alpha * P


def energy_cost(instance: Instance, schedule: ScheduleAssignment, flows: FlowVector, alpha=None) -> float:
    """Daily cost in cents."""
    demand = appliance_demand(instance, schedule)
    if np.any(np.abs(flows.mg_load + flows.res_load + flows.ess_load - demand) > 1e-6):
        raise ValueError("flows do not balance the appliance demand")
    return float(np.sum(slot_costs(instance, schedule, flows, alpha)))


def mo_value(cost, uc_raw, par_value, wt, weights: Weights | None = None) -> float:
    """``cost / (w1*UC - w2*PAR - w3*WT)``; unit weights when ``weights`` is None."""
    w1, w2, w3 = (1.0, 1.0, 1.0) if weights is None else weights.as_tuple()
    terms = (w1 * uc_raw, w2 * par_value, w3 * wt)
    den = terms[0] - terms[1] - terms[2]
    if not den > 0:
        raise NonPositiveDenominator(*terms)
    return cost / den


@dataclass(frozen=True)
class ObjectiveBreakdown:
    cost_cents: float
    uc_raw: float
    uc_max: float
    uc_index_percent: float
    par: float
    wt_slots: float
    mo_value: float | None
    ec: np.ndarray
    e_ld: np.ndarray


def evaluate(instance: Instance, schedule: ScheduleAssignment, flows: FlowVector,
             alpha=None, weights: Weights | None = None) -> ObjectiveBreakdown:
    """All metrics of one day; ``mo_value`` is None when its denominator is not positive."""
    weights = instance.weights if weights is None else weights
    ec = slot_costs(instance, schedule, flows, alpha)
    cost = energy_cost(instance, schedule, flows, alpha)
    raw, idx = user_convenience(instance, schedule)
    e_ld = flows.grid_draw
    p = par(np.maximum(e_ld, 0.0))
    wt = waiting_time(instance, schedule)
    try:
        mo = mo_value(cost, raw, p, wt, weights)
    except NonPositiveDenominator:
        mo = None
    return ObjectiveBreakdown(cost, raw, uc_max(instance), idx, p, wt, mo, ec, e_ld)


def appliance_costs(instance: Instance, schedule: ScheduleAssignment):
    """Per shiftable appliance: (energy kWh, cost at the grid price in cents)."""
    P = instance.prices.grid_price
    out = {}
    for a, row in zip(instance.shiftable, schedule.on_matrix(instance)):
        e = row * a.pr * instance.dt
        out[a.name] = (float(e.sum()), float(e @ P))
    return out
