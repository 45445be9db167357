class UpliftEvalError(Exception):
    """Base class for errors raised by uplift_eval."""


class SchemaError(UpliftEvalError):
    """A required column is missing or the column layout is inconsistent."""


class DataValidationError(UpliftEvalError, ValueError):
    """Input values violate a dataset invariant."""


class CrossFittingError(UpliftEvalError):
    """An adjustment function was fitted on rows it is now asked to adjust."""


class DegenerateSegmentError(UpliftEvalError, ValueError):
    """A ranked segment (or recommended set) lacks treated or control rows."""

    def __init__(self, share, message=None):
        self.share = share
        super().__init__(message or f"degenerate segment at share {share}: one arm is empty")
