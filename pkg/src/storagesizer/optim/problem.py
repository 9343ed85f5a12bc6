"""Linear problem container, an incremental builder and LP-format export."""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp

LE, EQ, GE = -1, 0, 1
_SENSE_CODES = {"<=": LE, "<": LE, "=": EQ, "==": EQ, ">=": GE, ">": GE, LE: LE, EQ: EQ, GE: GE}

FEAS_TOL = 1e-7
OPT_RTOL = 1e-7
INT_TOL = 1e-6


@dataclass(frozen=True)
class LpProblem:
    """``min c.x + offset`` subject to ``A x (<=,=,>=) rhs`` and ``lb <= x <= ub``.

    ``sense`` holds one of ``LE``, ``EQ``, ``GE`` per row.  ``integrality``
    marks variables that must take integer values (binaries in practice).
    """

    names: tuple
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    A: sp.csr_matrix
    sense: np.ndarray
    rhs: np.ndarray
    integrality: np.ndarray
    offset: float = 0.0
    row_names: tuple = ()

    def __post_init__(self):
        n = len(self.names)
        for arr in (self.c, self.lb, self.ub, self.integrality):
            if len(arr) != n:
                raise ValueError("variable arrays disagree in length")
        if self.A.shape != (len(self.rhs), n):
            raise ValueError(f"constraint matrix shape {self.A.shape} does not match "
                             f"{len(self.rhs)} rows x {n} variables")
        if len(self.sense) != len(self.rhs):
            raise ValueError("sense and rhs disagree in length")
        if np.any(self.lb > self.ub):
            j = int(np.argmax(self.lb > self.ub))
            raise ValueError(f"variable {self.names[j]!r} has lb {self.lb[j]} > ub {self.ub[j]}")
        if not set(np.unique(self.sense)) <= {LE, EQ, GE}:
            raise ValueError("unknown constraint sense")

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    @property
    def is_mip(self) -> bool:
        return bool(np.any(self.integrality))

    def index(self, name: str) -> int:
        return self.names.index(name)

    def with_bounds(self, lb=None, ub=None) -> "LpProblem":
        return replace(self, lb=self.lb if lb is None else np.asarray(lb, float),
                       ub=self.ub if ub is None else np.asarray(ub, float))

    def relaxed(self) -> "LpProblem":
        return replace(self, integrality=np.zeros(self.n_vars, dtype=bool))

    def objective(self, x) -> float:
        return float(self.c @ np.asarray(x, float) + self.offset)

    def max_violation(self, x) -> float:
        """Largest bound or row violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, float)
        viol = [0.0, float(np.max(self.lb - x, initial=0.0)), float(np.max(x - self.ub, initial=0.0))]
        if self.n_rows:
            ax = self.A @ x
            d = ax - self.rhs
            viol.append(float(np.max(np.where(self.sense == LE, d, 0.0), initial=0.0)))
            viol.append(float(np.max(np.where(self.sense == GE, -d, 0.0), initial=0.0)))
            viol.append(float(np.max(np.where(self.sense == EQ, np.abs(d), 0.0), initial=0.0)))
        return max(viol)


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    objective: float = float("nan")
    names: tuple = ()
    iterations: int = 0
    nodes: int = 0
    message: str = ""
    _lookup: dict = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def __getitem__(self, name: str) -> float:
        if self._lookup is None:
            self._lookup = {n: i for i, n in enumerate(self.names)}
        return float(self.x[self._lookup[name]])


class LpBuilder:
    """Accumulates variables and sparse rows, then freezes them into an ``LpProblem``.

    Batch methods take index arrays so model builders can stay vectorized.
    """

    def __init__(self):
        self._names: list[str] = []
        self._lb: list[np.ndarray] = []
        self._ub: list[np.ndarray] = []
        self._c: list[np.ndarray] = []
        self._int: list[np.ndarray] = []
        self._n = 0
        self._ri: list[np.ndarray] = []
        self._ci: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self._sense: list[np.ndarray] = []
        self._rhs: list[np.ndarray] = []
        self._row_names: list[str] = []
        self._m = 0
        self.offset = 0.0

    @property
    def n_vars(self) -> int:
        return self._n

    @property
    def n_rows(self) -> int:
        return self._m

    def add_vars(self, name: str, n: int, lb=0.0, ub=np.inf, cost=0.0, integer=False) -> np.ndarray:
        """Add ``n`` variables named ``name[0] .. name[n-1]``; returns their indices."""
        idx = np.arange(self._n, self._n + n)
        self._names.extend(f"{name}[{k}]" for k in range(n))
        self._lb.append(np.broadcast_to(np.asarray(lb, float), (n,)).copy())
        self._ub.append(np.broadcast_to(np.asarray(ub, float), (n,)).copy())
        self._c.append(np.broadcast_to(np.asarray(cost, float), (n,)).copy())
        self._int.append(np.full(n, bool(integer)))
        self._n += n
        return idx

    def add_var(self, name: str, lb=0.0, ub=np.inf, cost=0.0, integer=False) -> int:
        idx = self._n
        self._names.append(name)
        self._lb.append(np.array([lb], float))
        self._ub.append(np.array([ub], float))
        self._c.append(np.array([cost], float))
        self._int.append(np.array([bool(integer)]))
        self._n += 1
        return idx

    def add_row(self, cols: Sequence[int], vals: Sequence[float], sense, rhs: float, name: str = "") -> int:
        cols = np.asarray(cols, dtype=int)
        row = self._m
        self._ri.append(np.full(len(cols), row))
        self._ci.append(cols)
        self._vals.append(np.asarray(vals, float))
        self._sense.append(np.array([_SENSE_CODES[sense]]))
        self._rhs.append(np.array([rhs], float))
        self._row_names.append(name or f"r{row}")
        self._m += 1
        return row

    def add_rows(self, terms: Sequence[tuple], sense, rhs, name: str = "") -> np.ndarray:
        """Add a block of rows sharing one structure.

        ``terms`` is a sequence of ``(col_indices, coefficients)`` pairs, each
        array-like of length ``k`` (the number of rows) or broadcastable to it.
        Row ``r`` is ``sum_t coef_t[r] * x[col_t[r]] (sense) rhs[r]``.
        """
        rhs = np.atleast_1d(np.asarray(rhs, float))
        k = len(rhs)
        for cols, vals in terms:
            cols = np.broadcast_to(np.asarray(cols, dtype=int), (k,))
            vals = np.broadcast_to(np.asarray(vals, float), (k,))
            self._ri.append(np.arange(self._m, self._m + k))
            self._ci.append(cols.copy())
            self._vals.append(vals.copy())
        sense = np.broadcast_to(np.asarray([_SENSE_CODES[s] for s in np.atleast_1d(sense)]), (k,))
        self._sense.append(sense.copy())
        self._rhs.append(rhs)
        self._row_names.extend(f"{name or 'r'}[{j}]" for j in range(k))
        rows = np.arange(self._m, self._m + k)
        self._m += k
        return rows

    def set_bounds(self, idx, lb=None, ub=None):
        lb_all = np.concatenate(self._lb) if self._lb else np.zeros(0)
        ub_all = np.concatenate(self._ub) if self._ub else np.zeros(0)
        if lb is not None:
            lb_all[idx] = lb
        if ub is not None:
            ub_all[idx] = ub
        self._lb, self._ub = [lb_all], [ub_all]

    def add_cost(self, idx, cost):
        c = np.concatenate(self._c) if self._c else np.zeros(0)
        np.add.at(c, np.asarray(idx), np.asarray(cost, float))
        self._c = [c]

    def build(self) -> LpProblem:
        n = self._n
        cat = (lambda parts, dtype=float: np.concatenate(parts).astype(dtype) if parts
               else np.zeros(0, dtype=dtype))
        if self._ri:
            A = sp.csr_matrix((cat(self._vals), (cat(self._ri, int), cat(self._ci, int))),
                              shape=(self._m, n))
            A.sum_duplicates()
        else:
            A = sp.csr_matrix((self._m, n))
        return LpProblem(
            names=tuple(self._names),
            c=cat(self._c),
            lb=cat(self._lb),
            ub=cat(self._ub),
            A=A,
            sense=cat(self._sense, int) if self._sense else np.zeros(0, int),
            rhs=cat(self._rhs),
            integrality=cat(self._int, bool),
            offset=float(self.offset),
            row_names=tuple(self._row_names),
        )


def problem_from_dense(c, A=None, sense=None, rhs=None, lb=None, ub=None, integrality=None, names=None) -> LpProblem:
    """Convenience constructor for small hand-written problems."""
    c = np.asarray(c, float)
    n = len(c)
    A = np.zeros((0, n)) if A is None else np.atleast_2d(np.asarray(A, float))
    m = A.shape[0]
    sense = np.array([_SENSE_CODES[s] for s in (sense if sense is not None else [LE] * m)], dtype=int)
    return LpProblem(
        names=tuple(names or (f"x{j}" for j in range(n))),
        c=c,
        lb=np.zeros(n) if lb is None else np.asarray(lb, float),
        ub=np.full(n, np.inf) if ub is None else np.asarray(ub, float),
        A=sp.csr_matrix(A),
        sense=sense,
        rhs=np.zeros(m) if rhs is None else np.asarray(rhs, float),
        integrality=np.zeros(n, bool) if integrality is None else np.asarray(integrality, bool),
    )


def _lp_name(name: str) -> str:
    return name.replace("[", "(").replace("]", ")")


def _fmt(v: float) -> str:
    return repr(float(v))


def write_lp(problem: LpProblem, out=None) -> str:
    """Render ``problem`` in CPLEX LP text format for external cross-checks.

    Writes to ``out`` (path or text stream) when given; always returns the text.
    """
    names = [_lp_name(n) for n in problem.names]
    buf = io.StringIO()
    buf.write("\\ storagesizer export\nMinimize\n obj:")
    terms = [f" {'+' if v >= 0 else '-'} {_fmt(abs(v))} {names[j]}" for j, v in enumerate(problem.c) if v != 0]
    if problem.offset:
        terms.append(f" {'+' if problem.offset >= 0 else '-'} {_fmt(abs(problem.offset))}")
    buf.write("".join(terms) or " 0")
    buf.write("\nSubject To\n")
    A = problem.A.tocsr()
    ops = {LE: "<=", EQ: "=", GE: ">="}
    for i in range(problem.n_rows):
        start, end = A.indptr[i], A.indptr[i + 1]
        row = "".join(f" {'+' if v >= 0 else '-'} {_fmt(abs(v))} {names[j]}"
                      for j, v in zip(A.indices[start:end], A.data[start:end]))
        label = _lp_name(problem.row_names[i]) if problem.row_names else f"r{i}"
        buf.write(f" {label}:{row or ' 0 ' + names[0]} {ops[int(problem.sense[i])]} {_fmt(problem.rhs[i])}\n")
    buf.write("Bounds\n")
    for j, (lo, hi) in enumerate(zip(problem.lb, problem.ub)):
        lo_s = "-inf" if np.isneginf(lo) else _fmt(lo)
        hi_s = "+inf" if np.isposinf(hi) else _fmt(hi)
        buf.write(f" {lo_s} <= {names[j]} <= {hi_s}\n")
    ints = [names[j] for j in np.flatnonzero(problem.integrality)]
    if ints:
        buf.write("General\n " + " ".join(ints) + "\n")
    buf.write("End\n")
    text = buf.getvalue()
    if out is not None:
        if hasattr(out, "write"):
            out.write(text)
        else:
            with open(out, "w") as fh:
                fh.write(text)
    return text
