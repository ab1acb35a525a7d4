"""Exception hierarchy for hardylab."""


class HardyLabError(Exception):
    """Base class for all hardylab errors."""


class SupercriticalCouplingError(HardyLabError, ValueError):
    """Raised when the coupling exceeds the cone's critical value."""


class ShootingError(HardyLabError):
    """Raised when the cap eigenvalue shooting fails to bracket or converge."""


class DomainError(HardyLabError, ValueError):
    """Raised for invalid cone, bulge or truncation specifications."""


class MeshError(HardyLabError, ValueError):
    """Raised for degenerate resolutions or degenerate triangles."""


class PotentialSignError(HardyLabError, ValueError):
    """Raised when V becomes negative at a quadrature point."""

    def __init__(self, point, value):
        self.point = tuple(float(c) for c in point)
        self.value = float(value)
        super().__init__(
            f"potential sign violation: V={self.value:.6g} at "
            f"x=({self.point[0]:.6g}, {self.point[1]:.6g})"
        )


class DegenerateVectorError(HardyLabError, ValueError):
    """Raised when the V-weighted norm of a vector vanishes."""


class CutoffError(HardyLabError, ValueError):
    """Raised when a cutoff field violates its support invariant."""


class ConvergenceError(HardyLabError):
    """Raised when an iterative solver does not converge or breaks down."""


class SupercriticalShiftError(HardyLabError, ValueError):
    """Raised when a resolvent shift is not below the principal eigenvalue."""


class PositivityError(HardyLabError):
    """Raised when a principal eigenvector changes sign beyond tolerance."""


class DecayWindowError(HardyLabError, ValueError):
    """Raised when a decay-fit window holds too few samples."""


class ExperimentAssertionError(HardyLabError):
    """Raised when an experiment's expected inequality does not hold."""
