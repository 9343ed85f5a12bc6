"""LP/MILP infrastructure: problem container, solvers and chiller cuts."""

from __future__ import annotations

from .bnb import branch_and_bound
from .clarabel_backend import solve_clarabel
from .cuts import CutSet, build_chiller_cuts, plr_cut_coefficients
from .highs import solve_highs
from .problem import EQ, GE, LE, LpBuilder, LpProblem, LpSolution, problem_from_dense, write_lp
from .simplex import solve_simplex

LP_SOLVERS = {
    "simplex": solve_simplex,
    "highs": lambda p: solve_highs(p, relax=True),
    "clarabel": solve_clarabel,
}


def solve_lp(problem: LpProblem, solver: str = "simplex") -> LpSolution:
    """Solve the continuous problem; integrality flags are rejected."""
    if problem.is_mip:
        raise ValueError("solve_lp got integer variables; use solve_milp")
    try:
        backend = LP_SOLVERS[solver]
    except KeyError:
        raise ValueError(f"unknown LP solver {solver!r}; choose from {sorted(LP_SOLVERS)}") from None
    return backend(problem)


def solve_milp(problem: LpProblem, solver: str = "bnb", lp_solver: str = "simplex") -> LpSolution:
    """Solve with integrality enforced.

    ``solver='bnb'`` runs the bundled branch and bound on top of ``lp_solver``;
    ``solver='highs'`` hands the whole problem to HiGHS.
    """
    if solver == "highs":
        return solve_highs(problem)
    if solver != "bnb":
        raise ValueError(f"unknown MILP solver {solver!r}")
    backend = LP_SOLVERS[lp_solver]
    return branch_and_bound(problem, backend)


def solve(problem: LpProblem, solver: str = "highs") -> LpSolution:
    """Route to LP or MILP solving; ``solver`` names the LP engine underneath."""
    if problem.is_mip:
        if solver == "highs":
            return solve_milp(problem, solver="highs")
        return solve_milp(problem, solver="bnb", lp_solver=solver)
    return solve_lp(problem, solver)


__all__ = [
    "CutSet", "EQ", "GE", "LE", "LpBuilder", "LpProblem", "LpSolution",
    "branch_and_bound", "build_chiller_cuts", "plr_cut_coefficients", "problem_from_dense",
    "solve", "solve_clarabel", "solve_highs", "solve_lp", "solve_milp", "solve_simplex", "write_lp",
]
