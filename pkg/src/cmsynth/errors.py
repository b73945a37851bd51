"""Exception hierarchy for the cmsynth package."""


class CmsynthError(Exception):
    """Base class for all package errors."""


class GeometryError(CmsynthError):
    """Invalid wire geometry (degenerate segments, bad ports, plane clashes)."""


class DecompositionError(CmsynthError):
    """Characteristic-mode decomposition failed (singular resistance part)."""


class SolverError(CmsynthError):
    """A linear system could not be solved reliably."""

    def __init__(self, message: str, condition_estimate: float | None = None):
        if condition_estimate is not None:
            message = f"{message} (condition estimate {condition_estimate:.3e})"
        super().__init__(message)
        self.condition_estimate = condition_estimate


class ConstraintError(CmsynthError):
    """An algebraic precondition (matched ports, unit-norm transmit) is violated."""


class TerminationError(CmsynthError):
    """Port termination matrix is singular for the requested operation."""


class ResonanceError(SolverError):
    """The coupled inter-element system is singular (array resonance)."""


class DegenerateTargetError(CmsynthError):
    """A synthesis element needs no transmit drive; the update is undefined."""


class ConfigError(CmsynthError):
    """Run configuration is missing, malformed, or inconsistent."""
