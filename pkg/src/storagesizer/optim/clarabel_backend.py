"""Adapter to the Clarabel interior-point solver for large sparse LPs.

Interior-point solutions are not vertices; they are accurate to the solver
gap tolerance, which is what the sizing problem needs.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .problem import EQ, GE, LE, LpProblem, LpSolution

_STATUS = {
    "Solved": "optimal",
    "AlmostSolved": "optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
    "MaxIterations": "iteration_limit",
    "MaxTime": "time_limit",
}


def solve_clarabel(problem: LpProblem, time_limit: float | None = None, tol: float = 1e-9) -> LpSolution:
    import clarabel

    n = problem.n_vars
    A = problem.A.tocsr()
    eq = np.flatnonzero(problem.sense == EQ)
    le = np.flatnonzero(problem.sense == LE)
    ge = np.flatnonzero(problem.sense == GE)
    eye = sp.identity(n, format="csr")
    has_lb = np.isfinite(problem.lb)
    has_ub = np.isfinite(problem.ub)
    fixed = has_lb & has_ub & (problem.lb == problem.ub)
    lo_rows = has_lb & ~fixed
    hi_rows = has_ub & ~fixed
    blocks = [A[eq], eye[fixed], A[le], -A[ge], -eye[lo_rows], eye[hi_rows]]
    rhs = np.concatenate([problem.rhs[eq], problem.lb[fixed], problem.rhs[le], -problem.rhs[ge],
                          -problem.lb[lo_rows], problem.ub[hi_rows]])
    n_zero = len(eq) + int(fixed.sum())
    cones = []
    if n_zero:
        cones.append(clarabel.ZeroConeT(n_zero))
    if len(rhs) > n_zero:
        cones.append(clarabel.NonnegativeConeT(len(rhs) - n_zero))
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    if time_limit is not None:
        settings.time_limit = time_limit
    if not len(rhs):
        # bounds-only problem: pick the cheapest bound per variable
        x = np.where(problem.c > 0, problem.lb, np.where(problem.c < 0, problem.ub, np.clip(0.0, problem.lb, problem.ub)))
        if not np.all(np.isfinite(x)):
            return LpSolution("unbounded", names=problem.names)
        return LpSolution("optimal", x, problem.objective(x), problem.names)
    solver = clarabel.DefaultSolver(sp.csc_matrix((n, n)), np.asarray(problem.c, float),
                                    sp.vstack(blocks).tocsc(), rhs, cones, settings)
    res = solver.solve()
    status = _STATUS.get(str(res.status), "numerical_error")
    if status != "optimal":
        return LpSolution(status, names=problem.names, iterations=res.iterations, message=str(res.status))
    x = np.clip(np.asarray(res.x, float), problem.lb, problem.ub)
    return LpSolution("optimal", x, problem.objective(x), problem.names, iterations=res.iterations,
                      message=str(res.status))
