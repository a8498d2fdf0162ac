"""Exception types and warnings shared across the package."""


class PathregretError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(PathregretError):
    """Operands have incompatible shapes."""


class NoStabilizingSolution(PathregretError):
    """A Riccati equation has no stabilizing solution (or none was found)."""


class UnstableF(PathregretError):
    """Stein equation coefficient has spectral radius >= 1."""


class SingularEquation(PathregretError):
    """The linear system associated with a matrix equation is singular."""


class NotHermitian(PathregretError):
    """Inertia requested for a matrix that is not Hermitian to tolerance."""


class PoleHit(PathregretError):
    """Transfer-matrix evaluation requested at (or too close to) a pole."""


class SingularD(PathregretError):
    """State-space inversion requires an invertible feedthrough matrix."""


class GammaTooSmall(PathregretError):
    """Requested approximation level is below the attainable optimum."""


class SingularPivot(PathregretError):
    """A pivot matrix in the causal-approximation construction is singular."""


class NoFeasiblePoint(PathregretError):
    """Bracket expansion found no feasible point below the search cap."""


class InfeasibleSynthesis(PathregretError):
    """A synthesis factorization has no admissible solution at this level."""


class NumericalBlowup(PathregretError):
    """A simulated trajectory diverged beyond the configured magnitude cap."""


class NotStabilizable(PathregretError):
    """Plant fails the stabilizability rank test."""


class NotDetectable(PathregretError):
    """Plant fails the detectability rank test."""


class ConfigError(PathregretError):
    """Invalid experiment configuration.

    ``line`` is the 1-based line number in the config file when the error
    is anchored to one, else None.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonMonotoneWarning(UserWarning):
    """Feasibility flipped non-monotonically during a bisection bracket."""
