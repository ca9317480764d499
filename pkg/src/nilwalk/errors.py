"""Exception hierarchy shared by every module."""


class NilwalkError(Exception):
    """Base class for all errors raised by the package."""


class DimensionError(NilwalkError, ValueError):
    pass


class CompositionError(NilwalkError, ValueError):
    pass


class SingularSeriesError(NilwalkError, ArithmeticError):
    pass


class SingularSystemError(NilwalkError, ArithmeticError):
    pass


class DomainError(NilwalkError, ValueError):
    pass


class AlgebraError(NilwalkError, ValueError):
    pass


class UnsupportedStepError(AlgebraError):
    pass


class ValidationError(NilwalkError, ValueError):
    """Carries a list of human readable diagnostics."""

    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class SpectralError(NilwalkError, ArithmeticError):
    pass


class AssumptionError(NilwalkError, ValueError):
    """A model does not satisfy a hypothesis required by a computation."""


class IncompatibleRealizationError(NilwalkError, ValueError):
    pass


class ConfigError(NilwalkError, ValueError):
    pass
