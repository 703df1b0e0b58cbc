class InputError(ValueError):
    """Invalid argument or malformed input data."""


class ConvergenceError(RuntimeError):
    """An iterative routine ran out of iterations.

    The last iterate is kept on ``last_iterate`` so callers may still use it.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class DegenerateRound(RuntimeError):
    """A sampling round failed to shrink the matrix; recursion should stop."""


class ConstructionError(RuntimeError):
    """Coreset construction failed after all retries."""
