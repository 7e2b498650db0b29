"""Exception types shared across the package."""


class NonFinite(ValueError):
    """An input that must be finite was NaN or infinite."""


class NonFiniteIntegrand(ArithmeticError):
    """A quadrature integrand produced a non-finite value at some node."""

    def __init__(self, node):
        self.node = node
        super().__init__(f"integrand is not finite at node {node!r}")


class OrderOutOfRange(ValueError):
    pass


class InvalidParams(ValueError):
    pass


class ConstraintViolated(ValueError):
    pass


class DegenerateState(ValueError):
    pass


class DegenerateSigma(ArithmeticError):
    """The fixed-point iteration drove sigma to (numerically) zero."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NotConverged(RuntimeError):
    """An iterative solver stopped before meeting its tolerance.

    The best iterate found is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NonPositiveLambda(ValueError):
    pass


class ConfigError(ValueError):
    pass


class CompleteCaseEmpty(ValueError):
    """No fully observed row survived, so complete-case fitting is impossible."""
