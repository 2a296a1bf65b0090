"""Exception types shared across the package."""

from __future__ import annotations


class FockGerbeError(Exception):
    """Base class for all package errors."""


class PoleError(FockGerbeError, ValueError):
    pass


class ChartHoleError(FockGerbeError, ValueError):
    pass


class ZeroQuaternionError(FockGerbeError, ZeroDivisionError):
    pass


class NonUnitError(FockGerbeError, ValueError):
    pass


class SampleCountError(FockGerbeError, ValueError):
    pass


class NotLagrangianError(FockGerbeError, ValueError):
    pass


class BandTooWideError(FockGerbeError, ValueError):
    pass


class SingularCError(FockGerbeError, ArithmeticError):
    """C_g is singular or too badly conditioned; carries its smallest singular value."""

    def __init__(self, sigma_min: float, cond: float | None = None):
        self.sigma_min = float(sigma_min)
        self.cond = cond
        msg = f"C_g singular or ill-conditioned (sigma_min={self.sigma_min:.3e}"
        if cond is not None:
            msg += f", cond={cond:.3e}"
        super().__init__(msg + ")")


class TooFarError(FockGerbeError, ValueError):
    pass


class NonOrthogonalError(FockGerbeError, ValueError):
    pass


class NotSymError(FockGerbeError, ValueError):
    pass


class NonConvergedError(FockGerbeError, ArithmeticError):
    pass


class DegenerateSolutionError(FockGerbeError, ArithmeticError):
    def __init__(self, nullity: int, message: str | None = None):
        self.nullity = int(nullity)
        super().__init__(message or f"expected a one-dimensional solution space, found {nullity}")


class NonOrthogonalBlocksError(FockGerbeError, ValueError):
    pass


class TagMismatchError(FockGerbeError, ValueError):
    pass


class NerveIncompleteError(FockGerbeError, KeyError):
    pass


class InverseConventionError(FockGerbeError, ValueError):
    pass


class GridMismatchError(FockGerbeError, ValueError):
    pass


class SupportShapeError(FockGerbeError, ValueError):
    pass


class RefineError(FockGerbeError, ArithmeticError):
    def __init__(self, max_step: float, message: str | None = None):
        self.max_step = float(max_step)
        super().__init__(message or f"phase step {self.max_step:.3f} too large; refine the sampling")


class DegeneratePointError(FockGerbeError, ArithmeticError):
    def __init__(self, points, message: str | None = None):
        self.points = list(points)
        super().__init__(message or f"{len(self.points)} degenerate grid point(s)")
