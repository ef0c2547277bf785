class SpecgapError(Exception):
    """Base class for errors raised by specgap."""


class ConfigError(SpecgapError, ValueError):
    """Invalid user-supplied configuration or parameters."""


class NumericalError(SpecgapError, ArithmeticError):
    """A numerical procedure failed or produced an untrustworthy result."""


class DomainError(NumericalError, ValueError):
    """Evaluation requested outside the region where a quantity is defined."""
