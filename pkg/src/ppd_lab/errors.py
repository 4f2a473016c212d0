"""Exception hierarchy shared by every layer of the package."""


class PPDLabError(Exception):
    """Base class for all package errors."""


class DomainError(PPDLabError, ValueError):
    """A parameter or observation lies outside its declared support."""


class HyperparameterError(PPDLabError, ValueError):
    """Invalid prior or model hyperparameter; ``field`` names the offender."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class ConfigError(PPDLabError):
    """Configuration problem. Carries every validation error found, not just the first."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class NumericalError(PPDLabError):
    """A numerical routine failed to reach its tolerance."""

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class DegeneratePosteriorError(NumericalError):
    """Every node of a numerical posterior received zero likelihood."""


class UnreliablePosteriorError(NumericalError):
    """Importance weights collapsed onto too few draws."""


class UnsupportedCheckError(PPDLabError):
    """A diagnostic was requested for a model it cannot handle."""
