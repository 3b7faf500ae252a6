class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class DuplicateFrequency(DomainError):
    """A product of idempotents produced a coefficient larger than one."""


class NumericalFailure(ArithmeticError):
    """A numerical routine could not deliver the requested accuracy."""
