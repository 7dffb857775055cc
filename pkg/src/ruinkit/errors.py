"""Exception types shared across the package."""


class RuinkitError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(RuinkitError):
    """A run configuration is invalid. ``field`` names the offending path."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class ModelError(RuinkitError):
    """A domain object violates one of its structural invariants."""


class NonStochasticInitial(ModelError):
    """An initial probability vector has negative mass or does not sum to one."""


class InvalidSubgenerator(ModelError):
    """A matrix is not a valid transient sub-generator."""


class DimensionMismatch(ModelError):
    """Matrix or vector dimensions are incompatible."""


class NumericalError(RuinkitError):
    """Base class for failures of numerical procedures."""


class NumericalFailure(NumericalError):
    """A numerical routine produced an unusable result (e.g. complex dominant eigenvalue)."""


class SingularResolvent(NumericalError):
    """A resolvent (x*I - A) was numerically singular; the input matrix is not transient."""


class SylvesterFailure(NumericalError):
    """A Sylvester solve failed because the coefficient spectra overlap numerically."""


class NonConvergence(NumericalError):
    """An iteration exceeded its budget without meeting its tolerance."""


class TruncationLimit(NumericalError):
    """The claim-count truncation reached its cap before the target tolerance.

    Carries the last computed ``value`` and the truncation ``s`` at which the
    search stopped, so callers can surface partial results.
    """

    def __init__(self, message: str, value: float | None = None, s: int | None = None):
        super().__init__(message)
        self.value = value
        self.s = s
