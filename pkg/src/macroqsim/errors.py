"""Exception hierarchy shared by all modules."""


class MacroQSimError(Exception):
    """Base class for package errors."""


class ValidationError(MacroQSimError, ValueError):
    """Input violates a documented precondition."""


class DiagonalObservableError(ValidationError):
    """The (decohered) observable has a vanishing off-diagonal element <0|G|1>."""


class NumericalError(MacroQSimError, ArithmeticError):
    """A numerical procedure failed to reach its stated accuracy.

    ``diagnostics`` carries whatever the failing routine measured (achieved
    normalization, residual, leaked weight, ...).
    """

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        extra = ", ".join(f"{k}={v!r}" for k, v in sorted(self.diagnostics.items()))
        return f"{base} ({extra})"
