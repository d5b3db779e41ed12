"""Exception hierarchy shared by all modules."""


class MFErgodicError(Exception):
    """Base class for every error raised by the package."""


class InvalidGridError(MFErgodicError, ValueError):
    pass


class IncompatibleGridsError(MFErgodicError, ValueError):
    pass


class InvalidAxesError(MFErgodicError, ValueError):
    pass


class OutOfDomainError(MFErgodicError, ValueError):
    pass


class NormalizationError(MFErgodicError, ValueError):
    pass


class InvalidProfileError(MFErgodicError, ValueError):
    pass


class InvalidExponentError(MFErgodicError, ValueError):
    pass


class UnsupportedDimensionError(MFErgodicError, ValueError):
    pass


class ResolutionError(MFErgodicError, ValueError):
    """Grid too coarse for a kernel, or too large for the memory budget."""

    def __init__(self, message, suggested_points=None):
        super().__init__(message)
        self.suggested_points = suggested_points


class ConvergenceError(MFErgodicError, RuntimeError):
    def __init__(self, message, last_residual=float("nan")):
        super().__init__(message)
        self.last_residual = last_residual


class InstabilityError(MFErgodicError, RuntimeError):
    pass


class ConsistencyError(MFErgodicError, RuntimeError):
    """Two independent evaluation paths of the same quantity disagree."""


class ScenarioError(MFErgodicError, ValueError):
    pass


class InvalidPotentialError(MFErgodicError, ValueError):
    pass


class PipelineError(MFErgodicError, RuntimeError):
    """A module error annotated with the experiment stage that raised it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
