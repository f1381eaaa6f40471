"""Exception types shared across the library."""


class KafError(Exception):
    """Base class for library errors."""


class InvalidInputError(KafError, ValueError):
    """Arguments violate a documented precondition."""


class NumericalBlowupError(KafError, ArithmeticError):
    """A trajectory or intermediate quantity became non-finite."""


class TuningFailureError(KafError):
    """Automatic tuning (bandwidth sweep, HMC step size) found no usable value."""


class DegenerateGeometryError(KafError):
    """Point geometry admits no positive density estimate."""


class OutOfSupportError(KafError):
    """A query point carries no kernel mass against the training set."""


class NumericalError(KafError):
    """An iterative solver failed to converge."""


class DivergenceError(KafError):
    """Filter ensemble collapsed or diverged.

    Carries the assimilation step index at which the failure was detected.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
