"""Exception hierarchy shared by every module in the package."""


class SSMError(Exception):
    """Base class for all errors raised by ssmsmooth."""


class InvalidArgumentError(SSMError, ValueError):
    """An argument is outside the documented domain."""


class UnsupportedModelError(SSMError, TypeError):
    """The algorithm cannot run on this kind of model (e.g. non-Gaussian noise)."""


class NumericalFailureError(SSMError, ArithmeticError):
    """A recursion hit a singular or non-finite quantity."""


class SingularTransitionError(NumericalFailureError):
    """The transition matrix is not invertible, so the reversed model is undefined.

    The backward information filter only needs ``F.T`` and is the way around
    this; see :func:`ssmsmooth.twofilter.backward_information_filter`.
    """


class ParticleCollapseError(NumericalFailureError):
    """Every particle received zero weight at some time step."""

    def __init__(self, message, time_index):
        super().__init__(message)
        self.time_index = time_index


class ConfigError(SSMError, ValueError):
    """A model or run configuration could not be parsed."""
