"""Exception hierarchy.

``HypothesisError`` groups every failure that means "the inputs do not satisfy
the stated preconditions"; the CLI maps it to exit status 2.
"""


class HeilbronnError(Exception):
    """Base class for all package errors."""


class AmbiguousFloor(HeilbronnError, ArithmeticError):
    """The integer part of f(n) could not be certified."""

    def __init__(self, n, lo=None, hi=None):
        self.n = n
        self.lo = lo
        self.hi = hi
        msg = f"floor of f({n}) is ambiguous"
        if lo is not None:
            msg += f" (certified interval [{float(lo)!r}, {float(hi)!r}])"
        super().__init__(msg)


class HypothesisError(HeilbronnError, ValueError):
    """Inputs violate a precondition of the requested computation."""


class InvalidCase(HypothesisError):
    pass


class HypothesisViolated(HypothesisError):
    pass


class ConstraintViolated(HypothesisError):
    def __init__(self, violated, message=None):
        self.violated = list(violated)
        super().__init__(message or "violated: " + "; ".join(self.violated))


class NoAdmissibleDenominator(HypothesisError):
    pass


class TailTooLarge(HypothesisError):
    pass


class SingularBasis(HypothesisError):
    pass


class IllConditioned(HypothesisError):
    pass


class DegenerateInput(HypothesisError):
    pass


class InvalidFamilyParams(HypothesisError):
    pass


class IndexOutOfRange(HypothesisError, IndexError):
    pass


class ConfigError(HypothesisError):
    pass


class WitnessNotFound(HeilbronnError):
    """Raised only if an exhaustive search contradicts a guaranteed existence."""
