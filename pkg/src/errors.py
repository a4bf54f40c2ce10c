"""
Heralded Fock Tomography – Errors

Exception hierarchy shared by every module. The CLI maps each family to an
exit code (see main.py).
"""


class FockTomographyError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(FockTomographyError):
    """Invalid or inconsistent experiment configuration."""


class ParameterError(FockTomographyError, ValueError):
    """A physical parameter lies outside its allowed range."""


class DimensionError(ParameterError):
    """Fock index or matrix dimension incompatible with the truncation."""


class NumericalError(FockTomographyError):
    """A computation produced a result that violates a numerical invariant."""


class NotPositiveError(NumericalError):
    """Matrix has eigenvalues more negative than rounding can explain."""


class DegenerateHeraldError(NumericalError):
    """The requested herald has (numerically) zero probability."""


class SamplingRangeError(NumericalError):
    """The quadrature distribution extends beyond the tabulation range."""


class DataFormatError(FockTomographyError):
    """An input file does not follow its documented format."""
