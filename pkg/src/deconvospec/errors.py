"""Exception types raised by the test pipeline."""


class DeconvoSpecError(Exception):
    """Base class for all package errors."""


class UnstableDeconvolution(DeconvoSpecError, ArithmeticError):
    """The reciprocal error characteristic function overflows.

    Raised for supersmooth errors when ``mu * t**2`` exceeds the exponent cap,
    which means the bandwidth is too small for the error scale.
    """

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class QuadratureNonConvergence(DeconvoSpecError, ArithmeticError):
    """Doubling the u-space truncation radius changed the moments too much."""


class SingularDesign(DeconvoSpecError, ArithmeticError):
    """A moment matrix could not be solved even after ridging."""


class InputShapeMismatch(DeconvoSpecError, ValueError):
    """Inputs have inconsistent lengths or do not match the configuration."""
