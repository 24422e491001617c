"""Exception hierarchy shared by every carloss module."""


class CarlossError(Exception):
    """Base class for all errors raised by carloss."""


class InputError(CarlossError):
    """Malformed or inconsistent user input (files, shapes, labels)."""


class InvalidParameterError(CarlossError, ValueError):
    """A model or loss parameter lies outside its admissible set."""


class NumericalError(CarlossError, ArithmeticError):
    """A computation overflowed or otherwise lost meaning."""


class NumericalDegeneracyError(NumericalError):
    """A matrix that must be positive definite failed to factorize."""


class UndefinedRatioError(NumericalError):
    """A ratio has a zero denominator, e.g. relative risk on a degenerate posterior."""


class DomainError(CarlossError, ValueError):
    """Inputs fall outside the mathematical domain of a loss (e.g. PDL needs y > 0)."""
