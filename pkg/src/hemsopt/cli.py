"""Command line driver: run scenarios on a JSON config and write a report.

Outputs in ``--out``:

* ``report.json`` with the instance echo and checksum, every requested
  scenario solution, the lower-bound breakdown and any sweep tables;
* ``traces.csv`` with one row per (scenario, slot).

All algorithms are deterministic; ``--seed`` is accepted for interface
stability and has no effect.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .config import ConfigError, instance_checksum, instance_to_dict, load_config, reference_config_path
from .lowerbound import lower_bound
from .lpsolve import ToleranceSettings
from .model import FLOW_FIELDS, DaySolution, Instance, Weights, appliance_demand, format_slot
from .objectives import appliance_costs, evaluate
from .scheduler import (ECONOMIC, NORMAL, SMART, ScenarioConfig, alpha_sweep, run_economic, run_normal,
                        run_smart, weight_sweep)

TRACE_COLUMNS = ("scenario", "slot", "price", "demand") + FLOW_FIELDS + ("mode", "level", "ec", "e_ld")


def emit_schedule_table(solution: DaySolution, instance: Instance) -> str:
    """Start, energy and grid-price cost per shiftable appliance."""
    rows = [("Appliance", "Start", "Energy (kWh)", "Cost (cents)")]
    costs = appliance_costs(instance, solution.schedule)
    for a in instance.shiftable:
        e, c = costs[a.name]
        rows.append((a.name, format_slot(solution.schedule[a.name], instance.dt), f"{e:.2f}", f"{c:.2f}"))
    widths = [max(len(r[k]) for r in rows) for k in range(4)]
    lines = []
    for i, r in enumerate(rows):
        lines.append("  ".join(v.ljust(w) if k == 0 else v.rjust(w) for k, (v, w) in enumerate(zip(r, widths))))
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _floats(arr):
    return [float(v) for v in np.asarray(arr).ravel()]


def solution_record(instance: Instance, sol: DaySolution) -> dict:
    br = evaluate(instance, sol.schedule, sol.flows, sol.alpha)
    return {
        "scenario": sol.scenario,
        "alpha": sol.alpha,
        "schedule": dict(sol.schedule.start),
        "schedule_labels": {k: format_slot(v, instance.dt) for k, v in sol.schedule.start.items()},
        "cost_cents": sol.cost_cents,
        "uc_raw": sol.uc_raw,
        "uc_index_percent": sol.uc_index_percent,
        "par": sol.par,
        "wt_slots": sol.wt_slots,
        "mo_value": sol.mo_value,
        "peak_cap": sol.peak_cap,
        "proven": sol.proven,
        "info": {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in sol.info.items()},
        "appliances": {k: {"energy_kwh": e, "cost_cents": c}
                       for k, (e, c) in appliance_costs(instance, sol.schedule).items()},
        "flows": {name: _floats(getattr(sol.flows, name)) for name in FLOW_FIELDS + ("mode", "level")},
        "ec": _floats(br.ec),
        "e_ld": _floats(br.e_ld),
    }


def _sweep_row(instance, sol, **extra):
    return {**extra, "cost_cents": sol.cost_cents, "par": sol.par, "uc_index_percent": sol.uc_index_percent,
            "wt_slots": sol.wt_slots, "mo_value": sol.mo_value, "schedule": dict(sol.schedule.start)}


def _cell(v):
    if isinstance(v, (str, int)):
        return v
    return repr(float(v))


def write_traces(path, instance: Instance, solutions):
    """One CSV row per scenario and slot; ``ec`` sums to the scenario cost."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for sol in solutions:
            br = evaluate(instance, sol.schedule, sol.flows, sol.alpha)
            demand = appliance_demand(instance, sol.schedule)
            for t in range(instance.T):
                row = [sol.scenario, t, instance.prices.grid_price[t], demand[t]]
                row += [getattr(sol.flows, name)[t] for name in FLOW_FIELDS]
                row += [sol.flows.mode[t], sol.flows.level[t], br.ec[t], br.e_ld[t]]
                w.writerow([_cell(v) for v in row])


def _parse_floats(text, what):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{what} must be comma separated numbers") from None


def _weights(text):
    vals = _parse_floats(text, "--weights")
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("--weights needs three values w1,w2,w3")
    return vals


def read_weight_file(path):
    """Weight triples from a JSON list of triples or from ``w1,w2,w3`` lines."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = [_parse_floats(line, "weight file line") for line in text.splitlines()
                if line.strip() and not line.lstrip().startswith("#")]
    out = []
    for row in data:
        if isinstance(row, dict):
            row = [row["w1"], row["w2"], row["w3"]]
        if len(row) != 3:
            raise ValueError(f"weight row {row!r} needs three values")
        out.append(Weights(*[float(v) for v in row]))
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="hemsopt", description=__doc__.split("\n")[0])
    p.add_argument("--config", default=None, help="JSON instance (default: the shipped reference day)")
    p.add_argument("--scenario", choices=(NORMAL, ECONOMIC, SMART, "all"), default="all")
    p.add_argument("--alpha", type=float, default=None, help="selling factor, 0 < alpha <= 1")
    p.add_argument("--alpha-sweep", type=lambda s: _parse_floats(s, "--alpha-sweep"), default=None,
                   help="comma separated selling factors for a smart sweep")
    p.add_argument("--weights", type=_weights, default=None, help="w1,w2,w3 for the smart objective")
    p.add_argument("--weight-sweep", default=None, help="file of weight triples for a smart sweep")
    p.add_argument("--lower-bound-only", action="store_true")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--node-limit", type=int, default=None, help="economic branch-and-bound node limit")
    p.add_argument("--strict-utr", action="store_true", help="keep starts inside the UTR window")
    for name in ("feasibility", "optimality", "integrality", "mip_gap"):
        p.add_argument(f"--tol-{name.replace('_', '-')}", type=float, default=None)
    for name in ("max_iterations", "max_nodes"):
        p.add_argument(f"--tol-{name.replace('_', '-')}", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="accepted for compatibility; runs are deterministic")
    p.add_argument("--quiet", action="store_true", help="no tables on stdout")
    return p


def _tolerances(args):
    over = {k: getattr(args, f"tol_{k}") for k in
            ("feasibility", "optimality", "integrality", "mip_gap", "max_iterations", "max_nodes")}
    return ToleranceSettings(**{k: v for k, v in over.items() if v is not None})


def run(args) -> dict:
    inst = load_config(args.config or reference_config_path())
    alpha = inst.alpha if args.alpha is None else args.alpha
    if not 0 < alpha <= 1:
        raise ValueError("--alpha must satisfy 0 < alpha <= 1")
    tol = _tolerances(args)
    weights = Weights(*args.weights) if args.weights else None
    if weights is not None and weights.check():
        raise ValueError("invalid weights: " + "; ".join(weights.check()))
    base = ScenarioConfig(SMART, tol=tol, strict_utr=args.strict_utr)
    if args.node_limit is not None:
        base = replace(base, node_limit=args.node_limit)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    lb = lower_bound(inst, alpha, tol)
    report = {"instance": instance_to_dict(inst), "checksum": instance_checksum(inst),
              "alpha": alpha, "lower_bound": asdict(lb), "scenarios": {}}
    solutions = []
    if not args.lower_bound_only:
        wanted = (NORMAL, ECONOMIC, SMART) if args.scenario == "all" else (args.scenario,)
        for name in wanted:
            if name == NORMAL:
                sol = run_normal(inst, replace(base, scenario=NORMAL))
            elif name == ECONOMIC:
                sol = run_economic(inst, alpha, replace(base, scenario=ECONOMIC))
            else:
                sol = run_smart(inst, alpha, weights, base)
            solutions.append(sol)
            report["scenarios"][name] = solution_record(inst, sol)
        if args.alpha_sweep:
            sweep = alpha_sweep(inst, args.alpha_sweep, weights, base)
            report["alpha_sweep"] = [_sweep_row(inst, s, alpha=a) for a, s in zip(args.alpha_sweep, sweep)]
        if args.weight_sweep:
            wl = read_weight_file(args.weight_sweep)
            sweep = weight_sweep(inst, alpha, wl, base)
            report["weight_sweep"] = [_sweep_row(inst, s, weights=list(w.as_tuple())) for w, s in zip(wl, sweep)]
        write_traces(out / "traces.csv", inst, solutions)
    (out / "report.json").write_text(json.dumps(report, indent=2, default=_json_default), encoding="utf-8")
    if not args.quiet:
        print(f"lower bound: {lb.total_bound:.2f} cents")
        for sol in solutions:
            mo = "n/a" if sol.mo_value is None else f"{sol.mo_value:.4f}"
            print(f"\n[{sol.scenario}] cost {sol.cost_cents:.2f} cents  PAR {sol.par:.3f}  "
                  f"UC {sol.uc_index_percent:.2f}%  WT {sol.wt_slots:g}  MO {mo}"
                  + ("" if sol.proven else "  (not proven optimal)"))
            print(emit_schedule_table(sol, inst))
        for row in report.get("alpha_sweep", []):
            print(f"alpha {row['alpha']:g}: cost {row['cost_cents']:.2f}  PAR {row['par']:.3f}")
        for row in report.get("weight_sweep", []):
            print(f"weights {row['weights']}: cost {row['cost_cents']:.2f}  PAR {row['par']:.3f}")
    return report


def _json_default(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serialisable: {type(v).__name__}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        run(args)
    except ConfigError as exc:
        err = {"error": "config", "message": str(exc), "problems": list(getattr(exc, "problems", ()))}
        print(json.dumps(err), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - every failure becomes machine-readable
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
