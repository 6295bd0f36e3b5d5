"""Exception and warning types raised by the library."""


class StackgenError(Exception):
    """Base class for all errors raised by stackgen."""


class DataError(StackgenError):
    """Bad input data: parse failures, missing columns, invalid labels."""


class PipelineError(StackgenError):
    """Invalid pipeline specification or transform-time failure."""


class SpecError(StackgenError):
    """Invalid learner/stack specification (method, task, options)."""


class FitError(StackgenError):
    """A learner failed during fitting."""


class ModelFileError(StackgenError):
    """Corrupt, truncated, or version-incompatible model file."""


class ConvergenceWarning(UserWarning):
    """An iterative solver stopped at max_iter without meeting its tolerance."""
