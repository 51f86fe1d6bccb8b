import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog, milp, LinearConstraint, Bounds

from hemsopt.lpsolve import LinearProgram, MipProblem, SimplexSolver, Status, ToleranceSettings, solve_lp, solve_mip
from hemsopt.lpsolve.bnb import simple_rounding
from hemsopt.lpsolve.kernels import get_backend

BACKENDS = ["python", "cython"]


def _scipy_lp(lp):
    ub_rows = [i for i, s in enumerate(lp.senses) if s != "="]
    eq_rows = [i for i, s in enumerate(lp.senses) if s == "="]
    sign = np.array([1.0 if lp.senses[i] == "<=" else -1.0 for i in ub_rows])
    A_ub = lp.A[ub_rows] * sign[:, None] if ub_rows else None
    b_ub = lp.b[ub_rows] * sign if ub_rows else None
    A_eq = lp.A[eq_rows] if eq_rows else None
    b_eq = lp.b[eq_rows] if eq_rows else None
    bounds = [(None if np.isinf(lo) else lo, None if np.isinf(hi) else hi) for lo, hi in zip(lp.lb, lp.ub)]
    return linprog(lp.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")


def _random_lp(seed, m, n, free_frac=0.2):
    """Feasible, bounded LP with mixed row senses around a known interior point."""
    rng = np.random.default_rng(seed)
    A = np.round(rng.uniform(-5, 5, (m, n)), 2)
    x0 = rng.uniform(-2, 2, n)
    act = A @ x0
    senses = rng.choice(["<=", ">=", "="], m, p=[0.5, 0.3, 0.2])
    b = np.where(senses == "<=", act + rng.uniform(0, 3, m), np.where(senses == ">=", act - rng.uniform(0, 3, m), act))
    lb = np.full(n, -10.0)
    ub = np.full(n, 10.0)
    free = rng.random(n) < free_frac
    lb[free] = -np.inf
    c = np.round(rng.uniform(-3, 3, n), 2)
    # keep free columns bounded through a box row
    extra_A = np.vstack([np.eye(n)[free], -np.eye(n)[free]]) if free.any() else np.zeros((0, n))
    extra_b = np.full(extra_A.shape[0], 20.0)
    A = np.vstack([A, extra_A])
    b = np.concatenate([b, extra_b])
    senses = list(senses) + ["<="] * extra_A.shape[0]
    return LinearProgram(c, A, senses, b, lb, ub)


def test_textbook_lp():
    # maximise 3x + 5y subject to x <= 4, 2y <= 12, 3x + 2y <= 18; optimum 36 at (2, 6)
    lp = LinearProgram([-3, -5], [[1, 0], [0, 2], [3, 2]], ["<="] * 3, [4, 12, 18])
    out = solve_lp(lp)
    assert out.status is Status.OPTIMAL
    assert out.objective == pytest.approx(-36.0, abs=1e-9)
    assert out.x == pytest.approx([2.0, 6.0], abs=1e-9)


def test_infeasible_and_unbounded():
    lp = LinearProgram([1, 1], [[1, 1], [1, 1]], ["<=", ">="], [1, 2])
    assert solve_lp(lp).status is Status.INFEASIBLE
    lp = LinearProgram([-1, 0], [[0, 1]], ["<="], [1], lb=[0, 0], ub=[np.inf, np.inf])
    assert solve_lp(lp).status is Status.UNBOUNDED


def test_free_variable_and_equalities():
    lp = LinearProgram([1, 1], [[1, -1], [1, 1]], ["=", ">="], [3, -5], lb=[-np.inf, -np.inf], ub=[np.inf, np.inf])
    out = solve_lp(lp)
    assert out.status is Status.OPTIMAL
    assert out.objective == pytest.approx(-5.0, abs=1e-9)
    assert lp.violation(out.x) < 1e-7


def test_iteration_limit():
    lp = _random_lp(3, 12, 10)
    out = solve_lp(lp, ToleranceSettings(max_iterations=1))
    assert out.status is Status.ITERATION_LIMIT


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        LinearProgram([1, 2], [[1, 2, 3]], ["<="], [1])
    with pytest.raises(ValueError):
        LinearProgram([1], [[1]], ["<>"], [1])
    with pytest.raises(ValueError):
        LinearProgram([1], [[1]], ["<="], [1], lb=[2], ub=[1])
    with pytest.raises(ValueError):
        ToleranceSettings(feasibility=0)


@pytest.mark.parametrize("backend", BACKENDS)
@given(seed=st.integers(0, 10_000), m=st.integers(1, 12), n=st.integers(1, 10))
def test_lp_matches_highs(backend, seed, m, n):
    lp = _random_lp(seed, m, n)
    ref = _scipy_lp(lp)
    out = solve_lp(lp, backend=backend)
    assert ref.status == 0
    assert out.status is Status.OPTIMAL
    assert out.objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)
    assert lp.violation(out.x) <= 1e-7 * (1 + np.max(np.abs(out.x)))


@given(seed=st.integers(0, 10_000))
def test_backends_agree(seed):
    lp = _random_lp(seed, 8, 7)
    a = solve_lp(lp, backend="python")
    b = solve_lp(lp, backend="cython")
    assert a.status == b.status
    if a.status is Status.OPTIMAL:
        assert a.objective == pytest.approx(b.objective, rel=1e-9, abs=1e-9)


def test_deterministic():
    lp = _random_lp(7, 10, 8)
    xs = [solve_lp(lp).x for _ in range(3)]
    assert all(np.array_equal(xs[0], x) for x in xs[1:])


def test_warm_start_after_rhs_change():
    lp = _random_lp(11, 9, 6)
    solver = SimplexSolver(lp)
    first = solver.solve()
    assert first.status is Status.OPTIMAL
    b2 = lp.b + 0.5
    solver.set_rhs(b2)
    warm = solver.solve()
    cold = solve_lp(LinearProgram(lp.c, lp.A, lp.senses, b2, lp.lb, lp.ub))
    assert warm.status == cold.status
    if cold.status is Status.OPTIMAL:
        assert warm.objective == pytest.approx(cold.objective, abs=1e-7)


def test_large_rhs_not_declared_infeasible():
    # a loose row far beyond the default bounding box must not break feasibility
    lp = LinearProgram([1, 1], [[1, 1], [1, 0]], ["<=", ">="], [1e12, 1], lb=[0, 0], ub=[np.inf, np.inf])
    out = solve_lp(lp)
    assert out.status is Status.OPTIMAL
    assert out.objective == pytest.approx(1.0)


def _random_mip(seed, n=8, m=5):
    rng = np.random.default_rng(seed)
    A = rng.integers(1, 9, (m, n)).astype(float)
    b = np.floor(A.sum(axis=1) * rng.uniform(0.3, 0.7, m))
    c = -rng.integers(1, 20, n).astype(float)
    ub = rng.integers(1, 4, n).astype(float)
    integral = [j for j in range(n) if rng.random() < 0.7]
    return MipProblem(LinearProgram(c, A, ["<="] * m, b, np.zeros(n), ub), integral)


def _highs_mip(mip):
    lp = mip.lp
    integ = np.zeros(lp.num_vars)
    integ[list(mip.integral)] = 1
    lo = np.array([-np.inf if s == "<=" else v for s, v in zip(lp.senses, lp.b)])
    hi = np.array([np.inf if s == ">=" else v for s, v in zip(lp.senses, lp.b)])
    res = milp(lp.c, constraints=LinearConstraint(lp.A, lo, hi), bounds=Bounds(lp.lb, lp.ub),
               integrality=integ, options={"mip_rel_gap": 0})
    return res


@given(seed=st.integers(0, 10_000))
def test_mip_matches_highs(seed):
    mip = _random_mip(seed)
    ref = _highs_mip(mip)
    out = solve_mip(mip)
    assert out.status is Status.OPTIMAL
    assert out.objective == pytest.approx(ref.fun, abs=1e-6)
    x = out.x
    assert mip.lp.violation(x) <= 1e-7
    assert np.all(np.abs(x[list(mip.integral)] - np.round(x[list(mip.integral)])) <= 1e-6)
    assert out.objective >= solve_lp(mip.lp).objective - 1e-9


def test_mip_node_budget_reports_gap():
    mip = _random_mip(5, n=14, m=6)
    out = solve_mip(mip, ToleranceSettings(max_nodes=1))
    assert out.status in (Status.ITERATION_LIMIT, Status.OPTIMAL)
    if out.status is Status.ITERATION_LIMIT and out.x is not None:
        assert out.gap >= 0
        assert out.bound <= out.objective + 1e-9


def test_choice_sets_branching_matches_plain():
    # pick one option per group; options price differently, groups share a capacity row
    rng = np.random.default_rng(4)
    groups, cols = [], 0
    for _ in range(4):
        groups.append(tuple(range(cols, cols + 5)))
        cols += 5
    c = rng.uniform(1, 10, cols)
    w = rng.uniform(1, 5, cols)
    A = [w]
    senses = ["<="]
    b = [0.6 * w.sum() / 5 * 4 / 1.5]
    for g in groups:
        row = np.zeros(cols)
        row[list(g)] = 1
        A.append(row)
        senses.append("=")
        b.append(1)
    lp = LinearProgram(c, np.array(A), senses, b, np.zeros(cols), np.ones(cols))
    plain = solve_mip(MipProblem(lp, range(cols)))
    sets = solve_mip(MipProblem(lp, range(cols), tuple(groups)))
    ref = _highs_mip(MipProblem(lp, range(cols)))
    assert plain.status is sets.status
    if plain.status is Status.OPTIMAL:
        assert plain.objective == pytest.approx(sets.objective, abs=1e-9)
        assert sets.objective == pytest.approx(ref.fun, abs=1e-6)
    else:
        assert ref.status != 0


def test_choice_sets_validation():
    lp = LinearProgram([1, 1, 1], np.zeros((0, 3)), [], [], ub=[1, 1, 1])
    with pytest.raises(ValueError):
        MipProblem(lp, (0, 1), ((0, 2),))
    with pytest.raises(ValueError):
        MipProblem(lp, (0, 1, 2), ((0, 1), (1, 2)))


def test_bad_incumbent_is_ignored():
    mip = _random_mip(8)
    bogus = np.full(mip.lp.num_vars, 1e3)
    out = solve_mip(mip, incumbent=bogus)
    assert out.objective == pytest.approx(_highs_mip(mip).fun, abs=1e-6)


def test_good_incumbent_kept():
    mip = _random_mip(9)
    best = solve_mip(mip)
    again = solve_mip(mip, incumbent=best.x)
    assert again.objective == pytest.approx(best.objective, abs=1e-9)


def test_simple_rounding_respects_rows():
    lp = LinearProgram([1, 1], [[1, 1]], [">="], [1], ub=[1, 1])
    tol = ToleranceSettings()
    x = simple_rounding(lp, np.array([0.5, 0.5]), [0, 1], tol)
    assert x is not None and lp.violation(x) == 0


def test_get_backend_names():
    assert get_backend("python").__name__.endswith("_kernels_py")
    with pytest.raises(ValueError):
        get_backend("fortran")


def test_pure_python_fallback_selected_by_env():
    env = dict(os.environ, HEMSOPT_PURE_PYTHON="1")
    code = "from hemsopt.lpsolve import BACKEND; print(BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_compiled_backend_loaded():
    from hemsopt.lpsolve import BACKEND
    pytest.importorskip("hemsopt.lpsolve._kernels")
    assert BACKEND == "cython"
