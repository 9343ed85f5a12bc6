"""Dense two-phase tableau simplex.

Bounds are folded into standard form (shift, reflect or split variables, add
explicit rows for finite upper bounds), so the tableau only ever sees
``A y = b, y >= 0``.  Pricing is Dantzig's rule; after ``bland_after``
consecutive degenerate pivots it switches to Bland's rule for the rest of the
solve, which rules out cycling.
"""

from __future__ import annotations

import numpy as np

from .problem import EQ, FEAS_TOL, GE, LE, LpProblem, LpSolution

PIVOT_TOL = 1e-9


class _Tableau:
    def __init__(self, T: np.ndarray, basis: np.ndarray, bland_after: int, max_iter: int):
        self.T = T
        self.basis = basis
        self.bland_after = bland_after
        self.max_iter = max_iter
        self.iterations = 0
        self.stalled = 0
        self.bland = False

    def pivot(self, r: int, s: int):
        T = self.T
        T[r] /= T[r, s]
        col = T[:, s].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = s

    def run(self, d: np.ndarray, allowed: np.ndarray, opt_tol: float) -> str:
        """Minimize with reduced-cost row ``d`` (last entry is ``-z``)."""
        T = self.T
        while True:
            cand = np.flatnonzero(allowed & (d[:-1] < -opt_tol))
            if cand.size == 0:
                return "optimal"
            if self.iterations >= self.max_iter:
                return "iteration_limit"
            s = int(cand[0]) if self.bland else int(cand[np.argmin(d[cand])])
            col = T[:, s]
            rows = np.flatnonzero(col > PIVOT_TOL)
            if rows.size == 0:
                return "unbounded"
            ratios = T[rows, -1] / col[rows]
            theta = ratios.min()
            ties = rows[ratios <= theta + 1e-12 * max(1.0, abs(theta))]
            if self.bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(col[ties])])
            if theta <= FEAS_TOL * 1e-3:
                self.stalled += 1
                if self.stalled >= self.bland_after:
                    self.bland = True
            else:
                self.stalled = 0
            self.pivot(r, s)
            d -= d[s] * T[r]
            self.iterations += 1


def _standard_form(problem: LpProblem):
    """Map ``x = M y + shift`` with ``y >= 0`` and collect the transformed rows."""
    n = problem.n_vars
    A = problem.A.toarray()
    cols, shift = [], np.zeros(n)
    extra_rows = []  # (y column, upper) rows y <= upper
    for j in range(n):
        lo, hi = problem.lb[j], problem.ub[j]
        if np.isfinite(lo) and np.isfinite(hi) and hi - lo <= 0:
            shift[j] = lo
            continue
        if np.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    M = np.zeros((n, len(cols)))
    for k, (j, sgn) in enumerate(cols):
        M[j, k] = sgn
    Ay = A @ M
    b = problem.rhs - A @ shift
    sense = problem.sense.copy()
    if extra_rows:
        ub_rows = np.zeros((len(extra_rows), len(cols)))
        for i, (k, u) in enumerate(extra_rows):
            ub_rows[i, k] = 1.0
        Ay = np.vstack([Ay, ub_rows])
        b = np.concatenate([b, [u for _, u in extra_rows]])
        sense = np.concatenate([sense, np.full(len(extra_rows), LE)])
    cy = problem.c @ M
    const = float(problem.c @ shift) + problem.offset
    return Ay, b, sense, cy, const, M, shift


def solve_simplex(problem: LpProblem, max_iter: int | None = None, bland_after: int = 500,
                  opt_tol: float = 1e-9) -> LpSolution:
    """Solve the continuous relaxation of ``problem`` (integrality is ignored)."""
    A, b, sense, cy, const, M, shift = _standard_form(problem)
    m, ny = A.shape
    if m == 0:
        if np.any(cy < -opt_tol):
            return LpSolution("unbounded", names=problem.names)
        x = shift.copy()
        return LpSolution("optimal", x, problem.objective(x), problem.names)

    n_slack = int(np.sum(sense != EQ))
    slack_cols = np.zeros((m, n_slack))
    k = 0
    for i in range(m):
        if sense[i] == LE:
            slack_cols[i, k] = 1.0
            k += 1
        elif sense[i] == GE:
            slack_cols[i, k] = -1.0
            k += 1
    body = np.hstack([A, slack_cols])
    neg = b < 0
    body[neg] *= -1.0
    b = np.where(neg, -b, b)

    n_struct = ny + n_slack
    basis = np.full(m, -1)
    for i in range(m):
        hits = np.flatnonzero(body[i, ny:] == 1.0)
        for h in hits:
            if np.count_nonzero(body[:, ny + h]) == 1:
                basis[i] = ny + h
                break
    art_rows = np.flatnonzero(basis < 0)
    n_art = len(art_rows)
    art = np.zeros((m, n_art))
    for k, i in enumerate(art_rows):
        art[i, k] = 1.0
        basis[i] = n_struct + k
    T = np.hstack([body, art, b[:, None]])
    N = n_struct + n_art
    if max_iter is None:
        max_iter = 50 * (m + N) + 1000
    tab = _Tableau(T, basis, bland_after, max_iter)

    if n_art:
        d1 = np.zeros(N + 1)
        d1[n_struct:N] = 1.0
        d1 -= T[art_rows].sum(axis=0)
        allowed = np.ones(N, dtype=bool)
        status = tab.run(d1, allowed, opt_tol)
        if status == "iteration_limit":
            return LpSolution(status, names=problem.names, iterations=tab.iterations)
        infeas = -d1[-1]
        if infeas > FEAS_TOL * max(1.0, float(np.max(np.abs(b), initial=0.0))):
            return LpSolution("infeasible", names=problem.names, iterations=tab.iterations,
                              message=f"phase-1 residual {infeas:.3e}")
        # drive remaining artificials out of the basis or drop redundant rows
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if tab.basis[r] >= n_struct:
                nz = np.flatnonzero(np.abs(tab.T[r, :n_struct]) > PIVOT_TOL)
                if nz.size:
                    tab.pivot(r, int(nz[np.argmax(np.abs(tab.T[r, nz]))]))
                else:
                    keep[r] = False
        tab.T = np.hstack([tab.T[keep][:, :n_struct], tab.T[keep][:, -1:]])
        tab.basis = tab.basis[keep]
    cost = np.concatenate([cy, np.zeros(n_slack)])
    T = tab.T
    d2 = np.concatenate([cost, [0.0]])
    d2 -= cost[tab.basis] @ T
    allowed = np.ones(n_struct, dtype=bool)
    scale = max(1.0, float(np.max(np.abs(cost), initial=0.0)))
    status = tab.run(d2, allowed, opt_tol * scale)
    if status != "optimal":
        return LpSolution(status, names=problem.names, iterations=tab.iterations)
    y = np.zeros(n_struct)
    y[tab.basis] = tab.T[:, -1]
    y = np.maximum(y[:ny], 0.0)
    x = M @ y + shift
    x = np.clip(x, problem.lb, problem.ub)
    return LpSolution("optimal", x, problem.objective(x), problem.names, iterations=tab.iterations)
