"""Best-first branch and bound over an arbitrary LP backend."""

from __future__ import annotations

import heapq
import math
from typing import Callable

import numpy as np

from .problem import INT_TOL, LpProblem, LpSolution

LpBackend = Callable[[LpProblem], LpSolution]


def branch_and_bound(problem: LpProblem, lp_solve: LpBackend, int_tol: float = INT_TOL,
                     max_nodes: int = 200_000, gap_tol: float = 1e-9) -> LpSolution:
    """Globally optimal solution over the integer variables of ``problem``.

    Nodes are explored in order of their parent's relaxation bound (ties by
    creation order, so runs are deterministic).  Branches on the most
    fractional variable, lowest index first.
    """
    ints = np.flatnonzero(problem.integrality)
    relaxed = problem.relaxed()
    lb0 = np.where(problem.integrality, np.ceil(problem.lb - int_tol), problem.lb)
    ub0 = np.where(problem.integrality, np.floor(problem.ub + int_tol), problem.ub)
    if np.any(lb0 > ub0):
        return LpSolution("infeasible", names=problem.names)
    heap = [(-math.inf, 0, lb0, ub0)]
    counter = 1
    best_x, best_obj = None, math.inf
    nodes = 0
    iterations = 0
    while heap:
        bound, _, lb, ub = heapq.heappop(heap)
        if bound >= best_obj - gap_tol * max(1.0, abs(best_obj)):
            continue
        if nodes >= max_nodes:
            status = "iteration_limit"
            break
        nodes += 1
        sol = lp_solve(relaxed.with_bounds(lb, ub))
        iterations += sol.iterations
        if sol.status == "unbounded" and nodes == 1:
            return LpSolution("unbounded", names=problem.names, nodes=nodes)
        if not sol.optimal:
            if sol.status not in ("infeasible", "unbounded"):
                return LpSolution(sol.status, names=problem.names, nodes=nodes, message=sol.message)
            continue
        if sol.objective >= best_obj - gap_tol * max(1.0, abs(best_obj)):
            continue
        frac = np.abs(sol.x[ints] - np.round(sol.x[ints]))
        if ints.size == 0 or frac.max() <= int_tol:
            best_x, best_obj = sol.x.copy(), sol.objective
            if ints.size:
                best_x[ints] = np.round(best_x[ints])
            continue
        k = ints[int(np.argmax(np.round(frac, 9)))]
        v = sol.x[k]
        down_ub = ub.copy()
        down_ub[k] = math.floor(v)
        up_lb = lb.copy()
        up_lb[k] = math.ceil(v)
        heapq.heappush(heap, (sol.objective, counter, lb, down_ub))
        heapq.heappush(heap, (sol.objective, counter + 1, up_lb, ub))
        counter += 2
    else:
        status = "optimal" if best_x is not None else "infeasible"
    if best_x is None:
        return LpSolution(status if status != "optimal" else "infeasible", names=problem.names,
                          nodes=nodes, iterations=iterations)
    return LpSolution(status, best_x, problem.objective(best_x), problem.names,
                      iterations=iterations, nodes=nodes)
