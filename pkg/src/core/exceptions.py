"""
Error types raised by the numerical core.
Each carries the data needed to report the failure (modes, residuals, bounds).
"""

from typing import Iterable, List, Optional


class MomentMethodError(Exception):
    """Base class for numerical pipeline failures."""
    pass


class NonConvergedQuadrature(MomentMethodError):
    """Adaptive quadrature stalled above its tolerance."""

    def __init__(self, message: str, estimate: float = float("nan"), error: float = float("nan")):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class InsufficientSmoothness(MomentMethodError):
    """Operation needs more regularity than the function declares."""
    pass


class SupportOverlap(MomentMethodError):
    """Coupling supports meet the control set where they must be disjoint."""
    pass


class FailedPrecondition(MomentMethodError):
    """A quantity is ill-posed at some modes."""

    def __init__(self, message: str, modes: Optional[Iterable[int]] = None):
        super().__init__(message)
        self.modes: List[int] = list(modes or [])


class ThetaNotPositive(MomentMethodError):
    """Weight of a change of unknown is not bounded away from zero."""
    pass


class NoNonvanishingWindow(MomentMethodError):
    """No subinterval of ω where |p| stays above the floor."""
    pass


class WindowShrinkExhausted(MomentMethodError):
    """Window shrinking never brought the index perturbation under budget."""
    pass


class ScanExhausted(MomentMethodError):
    """No κ candidate in the scanned range satisfies the separation bound."""
    pass


class ResonantMode(MomentMethodError):
    """2k coincides with 2π/(β−α) and the bump integral is singular."""

    def __init__(self, message: str, k: int = 0):
        super().__init__(message)
        self.k = k


class StepScanExhausted(MomentMethodError):
    """Frequency scan found no j making J_{m,k} nonzero."""

    def __init__(self, message: str, mode: int = 0, bound: int = 0):
        super().__init__(message)
        self.mode = mode
        self.bound = bound


class IllConditioned(MomentMethodError):
    """Verified biorthogonality residual exceeds tolerance."""

    def __init__(self, message: str, residual: float = float("nan"), condition: float = float("nan")):
        super().__init__(message)
        self.residual = residual
        self.condition = condition


class OutOfDomain(MomentMethodError):
    """Evaluation point outside the function's domain."""
    pass


class ShapeSearchFailed(MomentMethodError):
    """Shape profiles failed the lower-bound checks on every attempt."""

    def __init__(self, message: str, modes: Optional[Iterable[int]] = None):
        super().__init__(message)
        self.modes: List[int] = list(modes or [])


class BothIndicesZero(MomentMethodError):
    """I_k = I_{a,k} = 0: the moment problem has no solution at this mode."""

    def __init__(self, message: str, k: int = 0):
        super().__init__(message)
        self.k = k


class SingularA1(MomentMethodError):
    """det A_{1,k} below tolerance in a branch that inverts A_{1,k}."""

    def __init__(self, message: str, k: int = 0, determinant: float = 0.0, bound: float = 0.0):
        super().__init__(message)
        self.k = k
        self.determinant = determinant
        self.bound = bound


class DivergentSeriesFit(MomentMethodError):
    """Control series coefficients do not decay."""
    pass


class ZeroIk(MomentMethodError):
    """Boundary moment problem met I_k = 0."""

    def __init__(self, message: str, k: int = 0):
        super().__init__(message)
        self.k = k


class NonConvergedTimeStepping(MomentMethodError):
    """Step doubling did not settle within tolerance."""
    pass


class ConfigError(MomentMethodError):
    """Run configuration could not be parsed or validated."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(message)
        self.line = line
        self.column = column


class MismatchedTruncation(MomentMethodError):
    """Two artifacts were produced with different K."""
    pass
