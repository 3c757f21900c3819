class GaugeError(Exception):
    """Base class for errors raised by gaugesim."""


class ConfigurationError(GaugeError, ValueError):
    """A system, experiment or run was configured inconsistently."""


class DomainError(GaugeError, ValueError):
    """An outcome or argument lies outside the space it must belong to."""


class NumericalError(GaugeError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy value."""
