"""Exception hierarchy shared by the models, optimizer and CLI."""

from __future__ import annotations


class StorageSizerError(Exception):
    """Base class for all package errors."""


class ConfigError(StorageSizerError):
    """Malformed scenario configuration or profile file."""


class CurveEvaluationError(StorageSizerError):
    def __init__(self, curve: str, value: float):
        super().__init__(f"curve {curve!r} evaluated to non-finite value {value!r}")
        self.curve = curve
        self.value = value


class CapacityExceededError(StorageSizerError):
    """Cooling load beyond what the chiller can deliver."""

    def __init__(self, q_load: float, q_max: float):
        self.q_load = q_load
        self.q_max = q_max
        self.deficit = q_load - q_max
        super().__init__(
            f"cooling load {q_load:.6g} kW exceeds deliverable capacity "
            f"{q_max:.6g} kW (deficit {self.deficit:.6g} kW)"
        )


class InfeasibleControlError(StorageSizerError):
    """A storage control violates one of its physical limits."""

    def __init__(self, limit: str, value: float, bound: float):
        self.limit = limit
        self.value = value
        self.bound = bound
        super().__init__(f"control violates {limit}: {value:.9g} vs bound {bound:.9g}")


class NonConvexCurveError(StorageSizerError):
    pass


class TariffCoverageError(StorageSizerError):
    pass


class EmptyInputError(StorageSizerError):
    pass


class InfeasibleHorizonError(StorageSizerError):
    """Dispatch horizon cannot meet demand at some step."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class SolverError(StorageSizerError):
    """Solver returned a non-optimal status where an optimum was required."""

    def __init__(self, status: str, message: str = ""):
        super().__init__(message or f"solver finished with status {status!r}")
        self.status = status


class InfeasibleBaselineError(StorageSizerError):
    pass


class NoFeasibleCombinationError(StorageSizerError):
    def __init__(self, violations: dict):
        self.violations = violations
        lines = "; ".join(f"{k}: {v}" for k, v in violations.items())
        super().__init__(f"no feasible catalog combination ({lines})")
