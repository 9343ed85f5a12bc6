"""Tangent-plane cuts for chiller electric power.

With temperatures fixed, chiller power as a function of nominal capacity C
and load q is

    f(C, q) = k * (c0 * psi1 * C + c1 * q + c2 * q**2 / (psi1 * C)),   k = psi2 / cop

The last term is the perspective of q**2, jointly convex for C > 0 when
c2 >= 0, and f is positively homogeneous.  Its tangent plane at any point
therefore passes through the origin and depends only on the part-load ratio
rho = q / (psi1 * C) of the tangency point:

    f(C, q) >= k * (c0 - c2 * rho**2) * psi1 * C + k * (c1 + 2 * c2 * rho) * q
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..energy_models import ChillerSpec, OperatingPoint, eval_temperature_curves
from ..errors import NonConvexCurveError


@dataclass(frozen=True)
class CutSet:
    """Affine under-estimators ``P >= alpha*C + beta*q + gamma``."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    plr: np.ndarray

    def __len__(self):
        return len(self.alpha)

    def value(self, capacity, q_load):
        """Max over cuts, broadcasting over ``capacity`` and ``q_load``."""
        C = np.asarray(capacity, float)[..., None]
        q = np.asarray(q_load, float)[..., None]
        out = np.max(self.alpha * C + self.beta * q + self.gamma, axis=-1)
        return float(out) if out.ndim == 0 else out


def plr_cut_coefficients(spec: ChillerSpec, op: OperatingPoint, plrs) -> tuple[np.ndarray, np.ndarray]:
    """Per-cut coefficients on available capacity ``q_avail`` and on load.

    ``P >= a * q_avail + b * q`` for each tangent part-load ratio in ``plrs``.
    """
    c0, c1, c2 = spec.curves.eir_plr
    if c2 < 0:
        raise NonConvexCurveError(
            f"eir_plr curvature c2={c2} < 0 makes chiller power non-convex; "
            "use minimum part-load commitment (mode 'milp') with convexified curves instead")
    _, psi2 = eval_temperature_curves(spec.curves, op)
    k = psi2 / spec.cop_ref
    rho = np.asarray(plrs, float)
    return k * (c0 - c2 * rho * rho), k * (c1 + 2.0 * c2 * rho)


def unique_plrs(plrs, decimals: int = 12) -> np.ndarray:
    return np.unique(np.round(np.asarray(plrs, float), decimals))


def build_chiller_cuts(spec: ChillerSpec, op: OperatingPoint, n_breakpoints: int,
                       c_range: tuple[float, float], q_range: tuple[float, float]) -> CutSet:
    """Tangent cuts at an ``n x n`` grid of (capacity, load) breakpoints.

    Breakpoints sharing a part-load ratio give the same plane, so duplicates
    are merged; an affine part-load curve collapses to a single exact cut.
    """
    if n_breakpoints < 1:
        raise ValueError("need at least one breakpoint per axis")
    c_lo, c_hi = c_range
    if not 0 < c_lo <= c_hi:
        raise ValueError("capacity range must be strictly positive")
    q_lo, q_hi = q_range
    if not 0 <= q_lo <= q_hi:
        raise ValueError("load range must be nonnegative")
    psi1, _ = eval_temperature_curves(spec.curves, op)
    if psi1 <= 0:
        raise ValueError(f"capacity modifier psi1={psi1} is not positive at {op}")
    Cs = np.linspace(c_lo, c_hi, n_breakpoints)
    qs = np.linspace(q_lo, q_hi, n_breakpoints)
    rho = unique_plrs((qs[None, :] / (psi1 * Cs[:, None])).ravel())
    a, b = plr_cut_coefficients(spec, op, rho)
    alpha = a * psi1
    pairs = np.unique(np.round(np.column_stack([alpha, b]), 12), axis=0, return_index=True)[1]
    keep = np.sort(pairs)
    return CutSet(alpha=alpha[keep], beta=b[keep], gamma=np.zeros(len(keep)), plr=rho[keep])
