"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Caller handed us data that violates a documented precondition."""


class ShapeError(ValueError):
    """Tensor/image shape does not meet a module contract."""


class GridInconsistencyError(RuntimeError):
    """Intersected separator grid is not monotone.

    Carries the offending corner indices so callers can attach the raw
    separators to an error result for debugging.
    """

    def __init__(self, message, indices=None):
        super().__init__(message)
        self.indices = indices or []


class WarpRetryError(RuntimeError):
    """Warp parameters pushed geometry out of the image; caller should retry."""


class TrainingAbortError(RuntimeError):
    """Training hit a non-finite loss; the last good checkpoint is retained."""

    def __init__(self, message, checkpoint_path=None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path
