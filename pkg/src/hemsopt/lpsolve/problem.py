"""Solver-facing problem containers and result records."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

SENSES = ("<=", "=", ">=")


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True)
class ToleranceSettings:
    """All numerical tolerances used by the LP and MIP solvers."""

    feasibility: float = 1e-7
    optimality: float = 1e-9
    integrality: float = 1e-6
    mip_gap: float = 1e-6
    pivot: float = 1e-9
    max_iterations: int = 200_000
    max_nodes: int = 200_000
    refactor_every: int = 100

    def __post_init__(self):
        for name in ("feasibility", "optimality", "integrality", "mip_gap", "pivot"):
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name} must be positive")
        if self.max_iterations < 1 or self.max_nodes < 1 or self.refactor_every < 1:
            raise ValueError("iteration, node and refactor limits must be >= 1")


class LinearProgram:
    """``min c.x + offset`` subject to ``A x (<=|=|>=) b`` and ``lb <= x <= ub``.

    ``A`` is stored dense. Row and column names are optional; ``row_tags``
    records which model equation produced each row (used by model audits).
    """

    def __init__(
        self,
        c,
        A,
        senses: Sequence[str],
        b,
        lb=None,
        ub=None,
        *,
        offset: float = 0.0,
        var_names: Optional[Sequence[str]] = None,
        row_names: Optional[Sequence[str]] = None,
        row_tags: Optional[Sequence[str]] = None,
    ):
        c = np.asarray(c, dtype=float).ravel()
        n = c.size
        A = np.asarray(A, dtype=float)
        if A.size == 0:
            A = A.reshape(0, n)
        if A.ndim != 2 or A.shape[1] != n:
            raise ValueError(f"constraint matrix has shape {A.shape}, expected (m, {n})")
        m = A.shape[0]
        b = np.asarray(b, dtype=float).ravel()
        if b.size != m:
            raise ValueError(f"rhs has {b.size} entries, expected {m}")
        senses = tuple(senses)
        if len(senses) != m:
            raise ValueError(f"{len(senses)} senses given for {m} rows")
        bad = [s for s in senses if s not in SENSES]
        if bad:
            raise ValueError(f"unknown row sense {bad[0]!r}")
        lb = np.zeros(n) if lb is None else np.asarray(lb, dtype=float).ravel()
        ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float).ravel()
        if lb.size != n or ub.size != n:
            raise ValueError("bound vectors must match the number of variables")
        if np.any(np.isnan(lb)) or np.any(np.isnan(ub)) or np.any(lb > ub):
            raise ValueError("variable bounds must satisfy lb <= ub")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("objective, matrix and rhs must be finite")
        for label, names, size in (("var_names", var_names, n), ("row_names", row_names, m), ("row_tags", row_tags, m)):
            if names is not None and len(names) != size:
                raise ValueError(f"{label} has {len(names)} entries, expected {size}")
        self.c = c
        self.A = A
        self.senses = senses
        self.b = b
        self.lb = lb
        self.ub = ub
        self.offset = float(offset)
        self.var_names = tuple(var_names) if var_names is not None else None
        self.row_names = tuple(row_names) if row_names is not None else None
        self.row_tags = tuple(row_tags) if row_tags is not None else None

    @property
    def num_vars(self) -> int:
        return self.c.size

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    def objective(self, x) -> float:
        return float(self.c @ np.asarray(x, dtype=float)) + self.offset

    def violation(self, x) -> float:
        """Largest constraint or bound violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        if self.num_rows:
            act = self.A @ x
            for sense, code in (("<=", 1), ("=", 0), (">=", -1)):
                mask = np.array([s == sense for s in self.senses])
                if not mask.any():
                    continue
                diff = act[mask] - self.b[mask]
                if code == 1:
                    v = np.max(diff, initial=0.0)
                elif code == -1:
                    v = np.max(-diff, initial=0.0)
                else:
                    v = np.max(np.abs(diff), initial=0.0)
                worst = max(worst, float(v))
        worst = max(worst, float(np.max(self.lb - x, initial=0.0)), float(np.max(x - self.ub, initial=0.0)))
        return worst

    def with_bounds(self, lb=None, ub=None) -> "LinearProgram":
        return LinearProgram(
            self.c, self.A, self.senses, self.b,
            self.lb if lb is None else lb, self.ub if ub is None else ub,
            offset=self.offset, var_names=self.var_names,
            row_names=self.row_names, row_tags=self.row_tags,
        )

    def dump(self) -> str:
        """Plain-text matrix dump, one line per nonzero (see README)."""
        lines = [f"LP {self.num_vars} {self.num_rows} {self.offset!r}"]
        vn = self.var_names or [f"x{j}" for j in range(self.num_vars)]
        rn = self.row_names or [f"r{i}" for i in range(self.num_rows)]
        tags = self.row_tags or [""] * self.num_rows
        for j in range(self.num_vars):
            lines.append(f"V {j} {vn[j]} {self.c[j]!r} {self.lb[j]!r} {self.ub[j]!r}")
        for i in range(self.num_rows):
            lines.append(f"R {i} {rn[i]} {self.senses[i]} {self.b[i]!r} {tags[i]}")
            for j in np.flatnonzero(self.A[i]):
                lines.append(f"A {i} {j} {self.A[i, j]!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class MipProblem:
    """An LP plus integrality marks.

    ``choice_sets`` optionally lists ordered groups of binary columns of
    which exactly one is 1 (for example the start slots of one appliance);
    branch and bound then splits a group by position instead of fixing a
    single column.
    """

    lp: LinearProgram
    integral: tuple = ()
    choice_sets: tuple = ()

    def __post_init__(self):
        idx = tuple(sorted({int(j) for j in self.integral}))
        if any(j < 0 or j >= self.lp.num_vars for j in idx):
            raise ValueError("integral index out of range")
        object.__setattr__(self, "integral", idx)
        sets = tuple(tuple(int(j) for j in g) for g in self.choice_sets)
        marked = set(idx)
        seen = set()
        for g in sets:
            if not g or any(j not in marked for j in g):
                raise ValueError("choice set columns must be integral")
            if seen & set(g):
                raise ValueError("choice sets overlap")
            seen |= set(g)
        object.__setattr__(self, "choice_sets", sets)


@dataclass
class SolveOutcome:
    status: Status
    objective: float = float("nan")
    x: Optional[np.ndarray] = None
    gap: float = float("nan")
    bound: float = float("nan")
    iterations: int = 0
    nodes: int = 0
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL
