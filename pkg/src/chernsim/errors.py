"""Exception hierarchy shared by all modules.

Each class carries the CLI exit code it maps to.
"""

from __future__ import annotations


class ChernSimError(Exception):
    exit_code = 1


class ConfigError(ChernSimError, ValueError):
    exit_code = 2


class NotHermitianError(ConfigError):
    def __init__(self, asymmetry: float):
        super().__init__(f"matrix is not Hermitian: max|M - M^dagger| = {asymmetry:.3e}")
        self.asymmetry = asymmetry


class GapClosureError(ChernSimError):
    """Ground state is (numerically) degenerate at a momentum or parameter point."""

    exit_code = 3

    def __init__(self, point, gap: float, where: str = ""):
        loc = f" ({where})" if where else ""
        super().__init__(f"gap closes at {tuple(point)}{loc}: |E1 - E0| = {gap:.3e}")
        self.point = tuple(point)
        self.gap = gap
        self.where = where


class RefinementNeededError(ChernSimError):
    """Consecutive states in a Wilson loop are nearly orthogonal."""

    exit_code = 3


class SymmetryViolationError(ChernSimError):
    exit_code = 3


class UndersamplingError(ChernSimError):
    exit_code = 3


class QuantizationError(ChernSimError):
    exit_code = 3


class BackendError(ChernSimError):
    exit_code = 4


class NonAdjacentGateError(BackendError):
    pass
