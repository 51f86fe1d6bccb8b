"""Time the compiled and numpy simplex kernels on the same workloads.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]

Each workload is solved with both backends; the objectives must agree to
1e-9 (relative) or the script exits non-zero.
"""

import argparse
import sys
import time

import numpy as np

from hemsopt.config import load_config, reference_config_path
from hemsopt.formulation import build_dispatch_lp, build_economic_milp, build_ess_arbitrage_mip
from hemsopt.lpsolve import LinearProgram, solve_lp, solve_mip
from hemsopt.scheduler import normal_starts

BACKENDS = ("python", "cython")


def random_lp(m, n, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 1, (m, n))
    x0 = rng.uniform(0, 1, n)
    b = A @ x0 + rng.uniform(0.1, 1.0, m)
    return LinearProgram(rng.normal(size=n), A, ["<="] * m, b, np.zeros(n), np.full(n, 5.0))


def workloads(quick):
    inst = load_config(reference_config_path())
    out = [(f"random LP {m}x{n}", "lp", random_lp(m, n, m)) for m, n in ((30, 60), (80, 160), (150, 300))]
    out.append(("arbitrage MIP, 24 slots", "mip", build_ess_arbitrage_mip(inst.prices, inst.ess, inst.grid)))
    out.append(("dispatch LP, normal starts", "lp", build_dispatch_lp(inst, normal_starts(inst), np.zeros(inst.T))))
    if not quick:
        out.append(("economic MILP, reference day", "mip", build_economic_milp(inst)))
    return out


def solve(kind, model, backend):
    if kind == "lp":
        return solve_lp(model, backend=backend)
    return solve_mip(model, backend=backend)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--quick", action="store_true", help="skip the economic MILP")
    args = p.parse_args(argv)

    print(f"{'workload':32s} {'python (s)':>11s} {'cython (s)':>11s} {'speedup':>8s}")
    ok = True
    for name, kind, model in workloads(args.quick):
        best, objs = {}, {}
        for backend in BACKENDS:
            times = []
            for _ in range(args.repeat):
                t = time.perf_counter()
                res = solve(kind, model, backend)
                times.append(time.perf_counter() - t)
            best[backend], objs[backend] = min(times), res.objective
        a, b = objs["python"], objs["cython"]
        if abs(a - b) > 1e-9 * max(1.0, abs(a)):
            ok = False
            print(f"  objective mismatch on {name}: {a!r} vs {b!r}")
        print(f"{name:32s} {best['python']:11.4f} {best['cython']:11.4f} {best['python'] / best['cython']:7.2f}x")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
