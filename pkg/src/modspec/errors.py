"""Exception hierarchy shared by all modspec modules."""


class ModspecError(Exception):
    """Base class for library errors."""


class GridMismatchError(ModspecError, ValueError):
    """Two objects live on different parameter grids or have incompatible shapes."""


class NotHermitianError(ModspecError, ValueError):
    pass


class NotProjectionError(ModspecError, ValueError):
    pass


class HypothesisError(ModspecError):
    """A lemma or proposition was invoked outside its hypotheses.

    The offending measured quantity is kept on ``value``.
    """

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


class RankError(ModspecError, ValueError):
    pass


class QuadratureError(ModspecError):
    def __init__(self, message, defect):
        super().__init__(message)
        self.defect = defect


class GapHypothesisError(HypothesisError):
    pass


class QOverflowError(ModspecError):
    """No rational approximation with denominator below ``q_max`` is good enough."""

    def __init__(self, message, theta, best):
        super().__init__(message)
        self.theta = theta
        self.best = best


class FormatError(ModspecError):
    """Malformed interchange file. ``offset`` is the byte offset of the bad line."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset
