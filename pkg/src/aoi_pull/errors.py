class ParameterError(ValueError):
    """A distribution or process parameter is outside its valid range."""


class DomainError(ValueError):
    """Arguments fall outside the domain where a quantity is defined."""
