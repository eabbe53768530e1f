"""Exception types raised by the analysis and simulation routines."""


class ParameterError(ValueError):
    """An input lies outside its legal domain."""


class StabilityError(ValueError):
    """The primary queue is unstable (arrival rate >= mu2)."""


class DegenerateModelError(ValueError):
    """The primary link can never succeed, so the queue chain is undefined."""


class NumericalError(RuntimeError):
    """A numerical solve failed to reach its residual target."""
