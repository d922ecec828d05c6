"""Exception hierarchy shared by the library and the CLI."""


class HtsimError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(HtsimError, ValueError):
    """Invalid parameters, gains or scenario configuration."""


class NumericalError(HtsimError, ArithmeticError):
    """A computation could not produce a finite, well-defined result."""


class DimensionError(NumericalError):
    pass


class IntegrationError(NumericalError):
    def __init__(self, msg, t=None):
        super().__init__(msg)
        self.t = t


class SingularError(NumericalError):
    """Singular mass, gain denominator, or matrix."""


class PoleError(SingularError):
    """Transfer function evaluated at (or numerically on) a pole."""


class UndefinedLagError(NumericalError):
    """Cross-correlation lag requested for a zero-variance signal."""


class ConvergenceError(NumericalError):
    pass


class DivergenceError(NumericalError):
    """A simulation left the bounded-state region."""


class PreconditionError(HtsimError, ValueError):
    pass
