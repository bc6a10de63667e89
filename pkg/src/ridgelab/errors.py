"""Exception types raised across ridgelab."""


class RidgeLabError(Exception):
    pass


class DomainError(RidgeLabError, ValueError):
    """Argument outside the domain of a link function or operation."""


class DegenerateLinkError(RidgeLabError):
    """A finite-difference threshold came out as zero (flat link)."""


class PreconditionError(RidgeLabError, ValueError):
    pass


class LinkValidationError(RidgeLabError, ValueError):
    pass


class BallViolationError(RidgeLabError, ValueError):
    """An action left the unit ball."""


class FullBasisError(RidgeLabError):
    pass


class NonUnitVectorError(RidgeLabError, ValueError):
    pass


class BudgetExceeded(RidgeLabError):
    """The environment refused a query because the trial budget is spent."""


class ParityMismatchError(RidgeLabError, ValueError):
    pass


class EmptyConfidenceSetError(RidgeLabError):
    pass


class DivergentIntegralError(RidgeLabError):
    """A bound integrand has a zero denominator on the integration range."""


class InsufficientDataError(RidgeLabError):
    pass


class FitDegenerateError(RidgeLabError):
    pass


class ConfigError(RidgeLabError, ValueError):
    """Config validation failure; ``errors`` maps field names to messages."""

    def __init__(self, errors):
        self.errors = dict(errors)
        msg = "; ".join(f"{k}: {v}" for k, v in self.errors.items())
        super().__init__(msg)
