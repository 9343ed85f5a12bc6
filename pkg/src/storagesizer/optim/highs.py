"""Adapter to the HiGHS solver shipped with SciPy."""

from __future__ import annotations

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .problem import GE, LE, LpProblem, LpSolution

_STATUS = {0: "optimal", 1: "iteration_limit", 2: "infeasible", 3: "unbounded", 4: "numerical_error"}


def solve_highs(problem: LpProblem, relax: bool = False, time_limit: float | None = None) -> LpSolution:
    rhs = problem.rhs
    lo = np.where(problem.sense == LE, -np.inf, rhs)
    hi = np.where(problem.sense == GE, np.inf, rhs)
    constraints = [LinearConstraint(problem.A, lo, hi)] if problem.n_rows else []
    integrality = None if relax else problem.integrality.astype(int)
    options = {"presolve": True}
    if time_limit is not None:
        options["time_limit"] = time_limit
    res = milp(problem.c, integrality=integrality, bounds=Bounds(problem.lb, problem.ub),
               constraints=constraints, options=options)
    status = _STATUS.get(res.status, "numerical_error")
    if status == "infeasible" and "unbounded" in (res.message or "").lower():
        status = "unbounded"
    if res.x is None or status != "optimal":
        return LpSolution(status, names=problem.names, message=res.message)
    x = np.clip(np.asarray(res.x, float), problem.lb, problem.ub)
    return LpSolution("optimal", x, problem.objective(x), problem.names, message=res.message)

