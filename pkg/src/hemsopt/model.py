"""Domain types for a single-home day-ahead schedule.

Slots are 0-based: slot ``t`` covers hours ``[t*dt, (t+1)*dt)``. Time
ranges (UTR/BTR) are inclusive slot indices in ``[0, T-1]``. All values
are immutable after construction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


def _frozen_array(values, name, length=None):
    arr = np.array(values, dtype=float).ravel()
    if length is not None and arr.size != length:
        raise ValueError(f"{name} has {arr.size} entries, expected {length}")
    arr.setflags(write=False)
    return arr


_LABEL = re.compile(r"^\s*(\d{1,2})\s*([AaPp])\.?\s*[Mm]\.?\s*$")


def parse_time_label(value, dt: float = 1.0) -> int:
    """Map a slot index or an hour label such as ``"6 A.M."`` to a slot.

    Labels follow the appliance-table convention: ``h A.M.`` is hour ``h``
    (so ``12 A.M.`` is noon and ``0 A.M.`` midnight) and ``h P.M.`` is hour
    ``h + 12`` (so ``12 P.M.`` is the end of the day, hour 24).
    """
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return int(value)
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if not isinstance(value, str):
        raise ValueError(f"cannot interpret {value!r} as a time")
    text = value.strip()
    if text.lstrip("-").isdigit():
        return int(text)
    m = _LABEL.match(text)
    if not m:
        raise ValueError(f"cannot interpret {value!r} as a time")
    hour = int(m.group(1))
    if hour > 12:
        raise ValueError(f"hour {hour} out of range in {value!r}")
    if m.group(2).upper() == "P":
        hour += 12
    slot = hour / dt
    if not float(slot).is_integer():
        raise ValueError(f"{value!r} does not fall on a slot boundary")
    return int(slot)


def parse_time_range(pair, dt: float = 1.0) -> tuple:
    """Map a ``[from, to]`` range to inclusive slot indices.

    Hour labels mark boundaries, so ``["6 A.M.", "8 A.M."]`` covers slots
    6 and 7. Integer entries are taken as inclusive slot indices.
    """
    if len(pair) != 2:
        raise ValueError(f"time range needs two entries, got {pair!r}")
    lo, hi = pair
    end = parse_time_label(hi, dt)
    if isinstance(hi, str) and not hi.strip().lstrip("-").isdigit():
        end -= 1
    return parse_time_label(lo, dt), end


def format_slot(slot: int, dt: float = 1.0) -> str:
    """Inverse of :func:`parse_time_label` for whole hours."""
    hour = int(round(slot * dt))
    if hour <= 12:
        return f"{hour} A.M."
    return f"{hour - 12} P.M."


@dataclass(frozen=True)
class TimeGrid:
    T: int = 24
    dt: float = 1.0

    def check(self):
        errs = []
        if self.T < 1:
            errs.append("TimeGrid.T: T >= 1")
        if not self.dt > 0:
            errs.append("TimeGrid.dt: dt > 0")
        elif abs(self.T * self.dt - 24.0) > 1e-9:
            errs.append("TimeGrid: T*dt = 24")
        return errs


@dataclass(frozen=True)
class PriceProfile:
    grid_price: np.ndarray
    alpha: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "grid_price", _frozen_array(self.grid_price, "grid_price"))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def sell_price(self):
        return self.alpha * self.grid_price

    def with_alpha(self, alpha):
        return PriceProfile(self.grid_price, alpha)

    def check(self, T):
        errs = []
        if self.grid_price.size != T:
            errs.append(f"PriceProfile.grid_price: length {self.grid_price.size} != T={T}")
        if np.any(~(self.grid_price > 0)):
            errs.append("PriceProfile.grid_price: all prices > 0")
        if not 0 < self.alpha <= 1:
            errs.append("PriceProfile.alpha: 0 < alpha <= 1")
        return errs


@dataclass(frozen=True)
class ResProfile:
    """PV output, either from irradiance (``ghi``, ``area_s``, ``eta_res``) or as energy."""

    ghi: np.ndarray | None = None
    area_s: float = 0.0
    eta_res: float = 1.0
    energy: np.ndarray | None = None

    def __post_init__(self):
        if (self.ghi is None) == (self.energy is None):
            raise ValueError("ResProfile needs exactly one of ghi or energy")
        if self.ghi is not None:
            object.__setattr__(self, "ghi", _frozen_array(self.ghi, "ghi"))
        else:
            object.__setattr__(self, "energy", _frozen_array(self.energy, "energy"))
        object.__setattr__(self, "area_s", float(self.area_s))
        object.__setattr__(self, "eta_res", float(self.eta_res))

    @classmethod
    def zero(cls, T):
        return cls(energy=np.zeros(T))

    @property
    def values(self):
        return self.ghi if self.ghi is not None else self.energy

    def scaled_area(self, factor):
        if self.ghi is not None:
            return ResProfile(ghi=self.ghi, area_s=self.area_s * factor, eta_res=self.eta_res)
        return ResProfile(energy=self.energy * factor)

    def check(self, T):
        errs = []
        if self.values.size != T:
            errs.append(f"ResProfile: length {self.values.size} != T={T}")
        if np.any(~(self.values >= 0)):
            errs.append("ResProfile: all entries >= 0")
        if self.ghi is not None:
            if not self.area_s >= 0:
                errs.append("ResProfile.area_s: area_s >= 0")
            if not 0 < self.eta_res <= 1:
                errs.append("ResProfile.eta_res: 0 < eta_res <= 1")
        return errs


@dataclass(frozen=True)
class EssParams:
    eta_ess: float = 0.95
    ch_rate: float = 1.0
    dh_rate: float = 1.0
    el0: float = 0.5
    el_min: float = 0.5
    el_max: float = 10.0

    @classmethod
    def disabled(cls, level=0.0):
        """A storage that can never move energy."""
        return cls(1.0, 0.0, 0.0, level, level, level)

    def check(self):
        errs = []
        if not 0 < self.eta_ess <= 1:
            errs.append("EssParams.eta_ess: 0 < eta_ess <= 1")
        if self.ch_rate < 0 or self.dh_rate < 0:
            errs.append("EssParams.ch_rate/dh_rate: rates >= 0")
        if not self.el_min <= self.el0:
            errs.append("EssParams.el0: el_min <= el0")
        if not self.el0 <= self.el_max:
            errs.append("EssParams.el0: el0 <= el_max")
        return errs


@dataclass(frozen=True)
class NonShiftableAppliance:
    name: str
    pr: float
    on: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "on", _frozen_array(self.on, "on"))
        object.__setattr__(self, "pr", float(self.pr))

    @classmethod
    def window(cls, name, pr, start, duration, T=24):
        on = np.zeros(T)
        on[start:start + duration] = 1.0
        return cls(name, pr, on)

    def check(self, T):
        errs = []
        if self.on.size != T:
            errs.append(f"NonShiftableAppliance[{self.name}].on: length {self.on.size} != T={T}")
        if np.any((self.on != 0) & (self.on != 1)):
            errs.append(f"NonShiftableAppliance[{self.name}].on: entries in {{0,1}}")
        if self.pr < 0:
            errs.append(f"NonShiftableAppliance[{self.name}].pr: pr >= 0")
        return errs


@dataclass(frozen=True)
class ShiftableAppliance:
    name: str
    pr: float
    lot: int
    utr: tuple
    btr: tuple
    pri: int = 1

    def __post_init__(self):
        object.__setattr__(self, "pr", float(self.pr))
        object.__setattr__(self, "lot", int(self.lot))
        object.__setattr__(self, "utr", (int(self.utr[0]), int(self.utr[1])))
        object.__setattr__(self, "btr", (int(self.btr[0]), int(self.btr[1])))
        object.__setattr__(self, "pri", int(self.pri))

    def latest_start(self, T):
        return T - self.lot

    def check(self, T):
        errs = []
        tag = f"ShiftableAppliance[{self.name}]"
        if not 1 <= self.lot <= T:
            errs.append(f"{tag}.lot: 1 <= lot <= T")
        us, ue = self.utr
        bs, be = self.btr
        if not (us <= bs <= be <= ue):
            errs.append(f"{tag}.utr/btr: us <= bs <= be <= ue")
        if us < 0 or ue > T - 1:
            errs.append(f"{tag}.utr: range within [0, T-1]")
        if self.pri not in (1, 2, 3):
            errs.append(f"{tag}.pri: pri in {{1,2,3}}")
        if self.pr < 0:
            errs.append(f"{tag}.pr: pr >= 0")
        return errs


@dataclass(frozen=True)
class ConsecutiveConstraint:
    predecessor: str
    successor: str
    min_delay: int = 0

    def __post_init__(self):
        object.__setattr__(self, "min_delay", int(self.min_delay))


@dataclass(frozen=True)
class Weights:
    """Weights of UC, PAR and WT in the MO denominator.

    ``unit=True`` is the unweighted form (all three weights 1) and skips
    the sum-to-one rule.
    """

    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0
    unit: bool = False

    @classmethod
    def unit_weights(cls):
        return cls(1.0, 1.0, 1.0, unit=True)

    def as_tuple(self):
        return (self.w1, self.w2, self.w3)

    def check(self):
        if self.unit:
            if self.as_tuple() != (1.0, 1.0, 1.0):
                return ["Weights: unit mode requires w1 = w2 = w3 = 1"]
            return []
        errs = []
        if any(not 0 <= w <= 1 for w in self.as_tuple()):
            errs.append("Weights: each weight in [0, 1]")
        if abs(sum(self.as_tuple()) - 1.0) > 1e-9:
            errs.append("Weights: w1 + w2 + w3 = 1")
        return errs


@dataclass(frozen=True)
class Instance:
    grid: TimeGrid
    prices: PriceProfile
    res: ResProfile
    ess: EssParams
    shiftable: tuple = ()
    non_shiftable: tuple = ()
    consecutive: tuple = ()
    weights: Weights = field(default_factory=Weights.unit_weights)
    normal_start: Mapping[str, int] | None = None

    def __post_init__(self):
        object.__setattr__(self, "shiftable", tuple(self.shiftable))
        object.__setattr__(self, "non_shiftable", tuple(self.non_shiftable))
        object.__setattr__(self, "consecutive", tuple(self.consecutive))
        if self.normal_start is not None:
            object.__setattr__(self, "normal_start", dict(self.normal_start))

    @property
    def T(self):
        return self.grid.T

    @property
    def dt(self):
        return self.grid.dt

    @property
    def alpha(self):
        return self.prices.alpha

    def appliance(self, name):
        for a in self.shiftable:
            if a.name == name:
                return a
        raise KeyError(f"unknown shiftable appliance {name!r}")

    def replace(self, **changes):
        from dataclasses import replace
        return replace(self, **changes)

    def with_alpha(self, alpha):
        return self.replace(prices=self.prices.with_alpha(alpha))


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok


def _has_cycle(names, edges):
    adj = {n: [] for n in names}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
    color = {}

    def visit(u):
        color[u] = 1
        for v in adj.get(u, ()):
            c = color.get(v, 0)
            if c == 1 or (c == 0 and visit(v)):
                return True
        color[u] = 2
        return False

    return any(color.get(n, 0) == 0 and visit(n) for n in list(adj))


def validate_instance(instance: Instance) -> ValidationReport:
    """Collect every violated invariant of ``instance``."""
    errs = list(instance.grid.check())
    T = instance.grid.T
    errs += instance.prices.check(T)
    errs += instance.res.check(T)
    errs += instance.ess.check()
    errs += instance.weights.check()
    names = [a.name for a in instance.shiftable]
    if len(set(names)) != len(names):
        errs.append("Instance.shiftable: appliance names unique")
    for a in instance.shiftable:
        errs += a.check(T)
    for b in instance.non_shiftable:
        errs += b.check(T)
    known = set(names)
    for c in instance.consecutive:
        tag = f"ConsecutiveConstraint[{c.predecessor}->{c.successor}]"
        if c.predecessor == c.successor:
            errs.append(f"{tag}: predecessor != successor")
        for ref in (c.predecessor, c.successor):
            if ref not in known:
                errs.append(f"{tag}: references unknown appliance {ref!r}")
        if c.min_delay < 0:
            errs.append(f"{tag}.min_delay: min_delay >= 0")
    if _has_cycle(names, [(c.predecessor, c.successor) for c in instance.consecutive]):
        errs.append("Instance.consecutive: acyclic")
    if instance.normal_start is not None:
        for name, s in instance.normal_start.items():
            if name not in known:
                errs.append(f"Instance.normal_start: unknown appliance {name!r}")
            elif not 0 <= s <= instance.appliance(name).latest_start(T):
                errs.append(f"Instance.normal_start[{name}]: 0 <= start <= T - LoT")
    return ValidationReport(tuple(errs))


@dataclass(frozen=True)
class ScheduleAssignment:
    """Start slot per shiftable appliance."""

    start: Mapping[str, int]

    def __post_init__(self):
        object.__setattr__(self, "start", {k: int(v) for k, v in dict(self.start).items()})

    def __getitem__(self, name):
        return self.start[name]

    def key(self, instance):
        return tuple(self.start[a.name] for a in instance.shiftable)

    def on_matrix(self, instance) -> np.ndarray:
        """Row per shiftable appliance (instance order), 1 while it runs."""
        O = np.zeros((len(instance.shiftable), instance.T))
        for k, a in enumerate(instance.shiftable):
            if a.name not in self.start:
                raise KeyError(f"schedule has no start for {a.name!r}")
            s = self.start[a.name]
            O[k, s:s + a.lot] = 1.0
        return O

    def violations(self, instance):
        errs = []
        T = instance.T
        for name in self.start:
            if name not in {a.name for a in instance.shiftable}:
                errs.append(f"unknown appliance {name!r}")
        for a in instance.shiftable:
            if a.name not in self.start:
                errs.append(f"missing start for {a.name!r}")
                continue
            s = self.start[a.name]
            if not 0 <= s <= T - a.lot:
                errs.append(f"{a.name}: 0 <= start <= T - LoT")
        for c in instance.consecutive:
            if c.predecessor in self.start and c.successor in self.start:
                j = instance.appliance(c.predecessor)
                if self.start[c.predecessor] + j.lot + c.min_delay > self.start[c.successor]:
                    errs.append(f"{c.predecessor}->{c.successor}: consecutive order")
        return errs

    @classmethod
    def from_key(cls, instance, key):
        return cls({a.name: int(s) for a, s in zip(instance.shiftable, key)})


FLOW_FIELDS = ("res_load", "res_charge", "mg_charge", "mg_load", "ess_load", "ess_selling")


@dataclass(frozen=True)
class FlowVector:
    """Per-slot energy flows (kWh) and the storage trajectory."""

    res_load: np.ndarray
    res_charge: np.ndarray
    mg_charge: np.ndarray
    mg_load: np.ndarray
    ess_load: np.ndarray
    ess_selling: np.ndarray
    mode: np.ndarray
    level: np.ndarray

    def __post_init__(self):
        for name in FLOW_FIELDS + ("mode", "level"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name), name))

    @classmethod
    def idle(cls, instance, demand):
        """No storage, no PV: the grid serves the whole demand."""
        T = instance.T
        z = np.zeros(T)
        return cls(z, z, z, np.asarray(demand, dtype=float), z, z, z,
                   np.full(T, instance.ess.el0))

    @property
    def charge(self):
        return self.res_charge + self.mg_charge

    @property
    def discharge(self):
        return self.ess_load + self.ess_selling

    @property
    def grid_draw(self):
        """E_LD(t): energy taken from the grid."""
        return self.mg_load + self.mg_charge

    def violations(self, instance, demand, res_energy, tol=1e-6):
        """Flow-level invariant breaches for a given demand and PV output."""
        ess = instance.ess
        errs = []
        for name in FLOW_FIELDS:
            if np.any(getattr(self, name) < -tol):
                errs.append(f"{name} >= 0")
        if np.any(self.res_load + self.res_charge > res_energy + tol):
            errs.append("PV use <= PV output")
        if np.any(np.abs(self.mg_load + self.res_load + self.ess_load - demand) > tol):
            errs.append("load balance")
        level = ess.el0 + np.cumsum(self.charge * ess.eta_ess - self.discharge / ess.eta_ess)
        if np.any(np.abs(level - self.level) > tol):
            errs.append("level recursion")
        if np.any(self.level < ess.el_min - tol) or np.any(self.level > ess.el_max + tol):
            errs.append("level bounds")
        if self.level.size and abs(self.level[-1] - ess.el0) > tol:
            errs.append("terminal level")
        dt = instance.dt
        if np.any(self.charge > ess.ch_rate * dt * self.mode + tol):
            errs.append("charge rate / mode")
        if np.any(self.discharge > ess.dh_rate * dt * (1 - self.mode) + tol):
            errs.append("discharge rate / mode")
        if np.any((self.charge > tol) & (self.discharge > tol)):
            errs.append("simultaneous charge and discharge")
        if np.any((self.mode != 0) & (self.mode != 1)):
            errs.append("mode binary")
        return errs


@dataclass(frozen=True)
class DaySolution:
    schedule: ScheduleAssignment
    flows: FlowVector
    cost_cents: float
    uc_raw: float
    uc_index_percent: float
    par: float
    wt_slots: float
    mo_value: float | None
    scenario: str
    alpha: float
    peak_cap: float | None = None
    proven: bool = True
    info: Mapping = field(default_factory=dict)


def res_energy(res: ResProfile, grid: TimeGrid) -> np.ndarray:
    """PV energy per slot in kWh."""
    vals = res.values
    if np.any(vals < 0):
        raise ValueError("PV profile entries must be >= 0")
    if res.ghi is not None:
        if res.area_s < 0 or not 0 < res.eta_res <= 1:
            raise ValueError("invalid PV area or efficiency")
        return res.ghi * res.area_s * res.eta_res * grid.dt
    return res.energy.copy()


def nonshiftable_demand(instance: Instance) -> np.ndarray:
    out = np.zeros(instance.T)
    for b in instance.non_shiftable:
        out += b.pr * b.on * instance.dt
    return out


def shiftable_demand(instance: Instance, schedule: ScheduleAssignment) -> np.ndarray:
    bad = set(schedule.start) - {a.name for a in instance.shiftable}
    if bad:
        raise KeyError(f"schedule references unknown appliance {sorted(bad)[0]!r}")
    pr = np.array([a.pr for a in instance.shiftable])
    if pr.size == 0:
        return np.zeros(instance.T)
    return (pr * instance.dt) @ schedule.on_matrix(instance)


def appliance_demand(instance: Instance, schedule: ScheduleAssignment) -> np.ndarray:
    """E_N(t) + E_M(t) in kWh."""
    return nonshiftable_demand(instance) + shiftable_demand(instance, schedule)
