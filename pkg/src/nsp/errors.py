"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """An optimisation or linear-algebra step failed to converge.

    Carries the interval (1-based, inclusive) the failure occurred on,
    when known.
    """

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval
