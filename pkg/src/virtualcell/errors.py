"""Exception types raised by the toolkit."""


class InvalidParameterError(ValueError):
    """A physical or numerical parameter is outside its valid range."""


class DivergentInterferenceError(InvalidParameterError):
    """Aggregate interference over the infinite plane is unbounded (alpha <= 2)."""


class NumericalFailureError(RuntimeError):
    """A quadrature did not reach its requested tolerance.

    The ``diagnostics`` mapping carries whatever the integrator reported
    (estimated error, interval, number of subdivisions).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        extra = ", ".join(f"{k}={v!r}" for k, v in self.diagnostics.items())
        return f"{base} ({extra})"
