"""JSON configuration: parsing into an :class:`Instance` and canonical dumping.

Schema (units in field names; times as slot indices or hour labels; a
range of labels ``[from, to]`` ends before hour ``to``)::

    grid:           {slots, slot_hours}
    prices:         {price_cents_per_kwh: [T], alpha}
    res:            {ghi_kw_per_m2: [T], area_m2, efficiency} | {energy_kwh: [T]}
    ess:            {efficiency, charge_rate_kw, discharge_rate_kw,
                     initial_level_kwh, min_level_kwh, max_level_kwh}
    shiftable:      [{name, pr_kw, lot_slots, utr: [a, b], btr: [a, b], priority,
                      normal_start?}]
    non_shiftable:  [{name, pr_kw, on: [T]} | {name, pr_kw, start, duration_slots}]
    consecutive:    [{predecessor, successor, min_delay_slots}]
    weights:        {w1, w2, w3, unit}
"""

from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path

import numpy as np

from .model import (ConsecutiveConstraint, EssParams, Instance, NonShiftableAppliance, PriceProfile,
                    ResProfile, ShiftableAppliance, TimeGrid, Weights, parse_time_label, parse_time_range,
                    validate_instance)


class ConfigError(ValueError):
    """Configuration could not be parsed or failed validation."""

    def __init__(self, message, problems=()):
        self.problems = list(problems)
        super().__init__(message if not self.problems else message + ": " + "; ".join(self.problems))


def reference_config_path() -> Path:
    return Path(str(resources.files("hemsopt") / "data" / "paper.json"))


def _get(d, key, where, default=None, required=True):
    if key in d:
        return d[key]
    if required and default is None:
        raise ConfigError(f"missing field {where}.{key}")
    return default


def instance_from_dict(data: dict) -> Instance:
    try:
        g = data.get("grid", {})
        grid = TimeGrid(int(g.get("slots", 24)), float(g.get("slot_hours", 1.0)))
        T, dt = grid.T, grid.dt
        p = _get(data, "prices", "config")
        prices = PriceProfile(_get(p, "price_cents_per_kwh", "prices"), float(p.get("alpha", 1.0)))
        r = data.get("res")
        if r is None:
            res = ResProfile.zero(T)
        elif "energy_kwh" in r:
            res = ResProfile(energy=r["energy_kwh"])
        else:
            res = ResProfile(ghi=_get(r, "ghi_kw_per_m2", "res"), area_s=float(_get(r, "area_m2", "res")),
                             eta_res=float(_get(r, "efficiency", "res")))
        e = data.get("ess")
        if e is None:
            ess = EssParams.disabled()
        else:
            ess = EssParams(float(_get(e, "efficiency", "ess")), float(_get(e, "charge_rate_kw", "ess")),
                            float(_get(e, "discharge_rate_kw", "ess")), float(_get(e, "initial_level_kwh", "ess")),
                            float(_get(e, "min_level_kwh", "ess")), float(_get(e, "max_level_kwh", "ess")))
        shiftable, normal = [], {}
        for k, a in enumerate(data.get("shiftable", [])):
            where = f"shiftable[{k}]"
            utr = parse_time_range(_get(a, "utr", where), dt)
            btr = parse_time_range(_get(a, "btr", where), dt)
            app = ShiftableAppliance(str(_get(a, "name", where)), float(_get(a, "pr_kw", where)),
                                     int(_get(a, "lot_slots", where)), tuple(utr), tuple(btr),
                                     int(_get(a, "priority", where)))
            shiftable.append(app)
            if a.get("normal_start") is not None:
                normal[app.name] = parse_time_label(a["normal_start"], dt)
        non_shiftable = []
        for k, b in enumerate(data.get("non_shiftable", [])):
            where = f"non_shiftable[{k}]"
            if "on" in b:
                on = b["on"]
            else:
                start = parse_time_label(_get(b, "start", where), dt)
                on = np.zeros(T)
                on[start:start + int(_get(b, "duration_slots", where))] = 1.0
            non_shiftable.append(NonShiftableAppliance(str(_get(b, "name", where)),
                                                       float(_get(b, "pr_kw", where)), on))
        consecutive = [ConsecutiveConstraint(str(_get(c, "predecessor", f"consecutive[{k}]")),
                                             str(_get(c, "successor", f"consecutive[{k}]")),
                                             int(c.get("min_delay_slots", 0)))
                       for k, c in enumerate(data.get("consecutive", []))]
        w = data.get("weights", {"unit": True})
        if w.get("unit", False):
            weights = Weights(float(w.get("w1", 1.0)), float(w.get("w2", 1.0)), float(w.get("w3", 1.0)), unit=True)
        else:
            weights = Weights(float(_get(w, "w1", "weights")), float(_get(w, "w2", "weights")),
                              float(_get(w, "w3", "weights")))
    except (TypeError, KeyError, AttributeError) as exc:
        raise ConfigError(f"malformed configuration ({exc})") from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid value ({exc})") from exc
    inst = Instance(grid, prices, res, ess, shiftable, non_shiftable, consecutive, weights,
                    normal or None)
    report = validate_instance(inst)
    if not report.ok:
        raise ConfigError("instance failed validation", report.violations)
    return inst


def load_config(path) -> Instance:
    """Parse and validate a JSON configuration file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: JSON parse error at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return instance_from_dict(data)


def load_reference_instance() -> Instance:
    return load_config(reference_config_path())


def _floats(arr):
    return [float(v) for v in np.asarray(arr).ravel()]


def instance_to_dict(inst: Instance) -> dict:
    """Canonical serialisation: slot indices, explicit on-patterns."""
    res = inst.res
    if res.ghi is not None:
        rd = {"ghi_kw_per_m2": _floats(res.ghi), "area_m2": res.area_s, "efficiency": res.eta_res}
    else:
        rd = {"energy_kwh": _floats(res.energy)}
    e = inst.ess
    out = {
        "grid": {"slots": inst.grid.T, "slot_hours": inst.grid.dt},
        "prices": {"price_cents_per_kwh": _floats(inst.prices.grid_price), "alpha": inst.prices.alpha},
        "res": rd,
        "ess": {"efficiency": e.eta_ess, "charge_rate_kw": e.ch_rate, "discharge_rate_kw": e.dh_rate,
                "initial_level_kwh": e.el0, "min_level_kwh": e.el_min, "max_level_kwh": e.el_max},
        "shiftable": [],
        "non_shiftable": [{"name": b.name, "pr_kw": b.pr, "on": _floats(b.on)} for b in inst.non_shiftable],
        "consecutive": [{"predecessor": c.predecessor, "successor": c.successor, "min_delay_slots": c.min_delay}
                        for c in inst.consecutive],
        "weights": {"w1": inst.weights.w1, "w2": inst.weights.w2, "w3": inst.weights.w3,
                    "unit": inst.weights.unit},
    }
    for a in inst.shiftable:
        d = {"name": a.name, "pr_kw": a.pr, "lot_slots": a.lot, "utr": list(a.utr), "btr": list(a.btr),
             "priority": a.pri}
        if inst.normal_start and a.name in inst.normal_start:
            d["normal_start"] = inst.normal_start[a.name]
        out["shiftable"].append(d)
    return out


def dump_config(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2, sort_keys=True)


def instance_checksum(inst: Instance) -> str:
    return hashlib.sha256(json.dumps(instance_to_dict(inst), sort_keys=True).encode()).hexdigest()
