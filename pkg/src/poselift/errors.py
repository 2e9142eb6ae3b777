"""Exception types shared across the package."""


class PoseError(ValueError):
    """Invalid pose data (wrong shape, non-finite values, wrong frame)."""


class BvhParseError(ValueError):
    """Malformed BVH input. Carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ProjectionError(ValueError):
    """A joint cannot be projected (non-positive depth)."""


class FitError(RuntimeError):
    """Model fitting failed (e.g. a Gram matrix is not positive definite)."""


class LayoutMismatchError(ValueError):
    """Feature layout of a model does not match the data it is applied to."""
