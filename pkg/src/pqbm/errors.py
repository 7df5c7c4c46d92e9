"""Exception hierarchy shared by all modules."""


class InputError(ValueError):
    """Malformed arguments or configuration (bad shapes, ranges, schema)."""


class DomainError(ValueError):
    """Mathematically valid input outside an operation's hypotheses."""


class NumericError(RuntimeError):
    """Estimator or solver breakdown (singular systems, failed quadrature)."""
