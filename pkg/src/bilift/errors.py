"""Exception types shared across the package."""


class BiliftError(Exception):
    """Base class for all package errors."""


class ExprSyntaxError(BiliftError):
    """Malformed expression text."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at column {position + 1})"
        super().__init__(message)


class UnsupportedFunctionError(ExprSyntaxError):
    """A function outside sin/cos/exp was used."""


class NonAffineArgumentError(ExprSyntaxError):
    """sin/cos/exp applied to a non-affine argument."""


class DimensionMismatchError(BiliftError):
    """Operands live over different ambient dimensions."""


class IndexOutOfRangeError(BiliftError):
    """Coordinate index outside 1..n."""


class EmptySeedError(BiliftError):
    """Closure iteration started from an empty generator list."""


class NotStabilizedError(BiliftError):
    """Operation requires a stabilized closure outcome."""


class NotInvariantError(BiliftError):
    """A Lie derivative left the supposedly invariant space."""


class MissingProjectionError(BiliftError):
    """A coordinate function is not recoverable from the lifted basis."""


class ScheduleInvalidError(BiliftError):
    """Control schedule breaks its invariants."""


class NonSquareError(BiliftError):
    """Matrix argument must be square."""


class NonFiniteError(BiliftError):
    """Matrix or state contains NaN or infinity."""


class EmptySpanError(BiliftError):
    """Adjoint span is degenerate (all generators zero)."""


class SingularSylvesterError(BiliftError):
    """Lyapunov equation has a resonant (singular) spectrum."""


class NotStabilizableError(BiliftError):
    """Drift matrix is not Hurwitz; no Lyapunov solution with Qd > 0."""


class SingularRError(BiliftError):
    """Control weight matrix is singular."""


class NonFiniteStateError(BiliftError):
    """Simulation blew up."""


class SweepDivergedError(BiliftError):
    """Forward-backward sweep control norm exceeded its cap."""


class InputFileError(BiliftError):
    """System/realization/schedule file is missing or malformed."""
