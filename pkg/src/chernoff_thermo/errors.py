"""Exception and warning types raised by the library.

Every domain error derives from :class:`ChernoffError`; the CLI prints the
class name on the error stream and exits with status 1.
"""


class ChernoffError(Exception):
    """Base class for all domain errors."""


class ParseError(ChernoffError):
    """A model or problem document is malformed."""


class InvalidModel(ChernoffError):
    """A document parsed but violates a model invariant."""


class InconsistentCounts(ChernoffError):
    """Integer weight counts do not reproduce the conditional probabilities."""


class MissingCounts(ChernoffError):
    """An operation needs integer weight counts but none are attached."""


class OutOfRange(ChernoffError):
    """An energy, distortion or threshold lies outside its admissible range."""


class NonConvergence(ChernoffError):
    """A root-finder or minimizer did not reach its tolerance."""


class SearchBudgetExceeded(ChernoffError):
    """The allocation grid search would exceed its point budget."""


class RoundingError(ChernoffError):
    """n * p(v) is not integral for some subsystem."""


class BinBudgetExceeded(ChernoffError):
    """The quantized convolution would need too many bins."""


class QuadratureFailure(ChernoffError):
    """Adaptive quadrature did not meet its error tolerance."""


class InfeasibleBudget(ChernoffError):
    """No quantizer satisfies the rate budget."""


class ValidityWarning(UserWarning):
    """A high-resolution approximation is used outside its validity range."""
