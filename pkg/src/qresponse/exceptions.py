"""Exception types raised by the numerical routines."""


class NonHermitianError(ValueError):
    """An operator expected to be Hermitian is not (within tolerance)."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to produce a trustworthy result."""


class DegeneracyError(NumericalError):
    """An eigenvalue gap fell below the guard threshold.

    The offending gap is stored on ``gap``.
    """

    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class StepUnderflowError(NumericalError):
    """Time stepping could not meet the requested tolerance."""


class GaugeError(NumericalError):
    """Neighbouring eigenvectors are not in a smooth gauge."""


class UnidentifiableError(ValueError):
    """The measurements carry no information about the unknowns."""


class SingularSystemError(NumericalError):
    """The inversion problem is rank deficient."""
