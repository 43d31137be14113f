"""Exception types shared across the package."""


class HopTrajError(Exception):
    """Base class for all package errors."""


class SingularityError(HopTrajError, ValueError):
    """A kinematic or flatness singularity was hit.

    ``t`` carries the trajectory time stamp when the error came from
    sampling a trajectory, otherwise ``None``.
    """

    def __init__(self, message, t=None):
        if t is not None:
            message = f"{message} (t = {t:.6g} s)"
        super().__init__(message)
        self.t = t


class DomainError(HopTrajError, ValueError):
    """Evaluation requested outside the trajectory time domain."""


class ConditioningError(HopTrajError, ValueError):
    """A linear system was singular or too ill-conditioned to trust."""

    def __init__(self, message, condition=None):
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3e})"
        super().__init__(message)
        self.condition = condition


class ConstraintPatternError(HopTrajError, ValueError):
    """Keyframe desired/free flags do not match the trajectory type."""


class InfeasibleTrajectoryError(HopTrajError):
    """A generated trajectory requires (near) zero or negative thrust."""

    def __init__(self, message, t=None):
        if t is not None:
            message = f"{message} (t = {t:.6g} s)"
        super().__init__(message)
        self.t = t


class ContactError(HopTrajError, ValueError):
    """Stance map called on a state that is not in contact."""
