"""Exception types shared across the package."""


class BudgetExceededError(ValueError):
    """A sieve or factorization request is larger than the configured budget.

    Callers that can live with an analytic estimate (for instance the
    Chebyshev-type bounds on pi(x)) should catch this and fall back.
    """

    def __init__(self, what: str, requested: int, limit: int):
        self.what = what
        self.requested = requested
        self.limit = limit
        super().__init__(f"{what} of {requested} exceeds budget {limit}")


class InvalidParameterError(ValueError):
    pass


class IterationCapExceeded(RuntimeError):
    pass


class SchemeConstructionError(ValueError):
    pass


class KeyGenerationError(RuntimeError):
    """GMR returned bottom on every retry."""


class MalformedCodewordError(ValueError):
    pass


class WidthMismatchError(MalformedCodewordError):
    pass


class TagOutOfRangeError(MalformedCodewordError):
    pass


class DomainMismatchError(ValueError):
    pass


class InvalidCodeError(ValueError):
    pass


class IncompatibleFamilyError(ValueError):
    pass


class CertificateError(ValueError):
    """A hash family or code failed its exhaustive verification."""


class DestinationUnwritableError(OSError):
    pass
