class GraphCompError(Exception):
    """Base class for errors raised by graphcomp."""


class ValidationError(GraphCompError, ValueError):
    """Invalid input: bad shapes, out-of-range ids, malformed files or config."""


class NumericalError(GraphCompError, ArithmeticError):
    """A computation produced a non-finite value (for example, diverging training)."""
