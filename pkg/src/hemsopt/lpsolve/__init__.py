"""Dense simplex LP solver and best-first branch and bound."""

from .bnb import solve_mip
from .kernels import BACKEND
from .problem import LinearProgram, MipProblem, SolveOutcome, Status, ToleranceSettings
from .simplex import SimplexSolver, solve_lp

__all__ = [
    "BACKEND",
    "LinearProgram",
    "MipProblem",
    "SimplexSolver",
    "SolveOutcome",
    "Status",
    "ToleranceSettings",
    "solve_lp",
    "solve_mip",
]
