"""Exception hierarchy.

Every error raised on bad input derives from :class:`ValueError` so callers
can catch the whole family at once; solver breakdowns derive from
:class:`RuntimeError`.
"""


class InvalidDomainError(ValueError):
    pass


class InvalidExponentError(ValueError):
    pass


class InvalidParameterError(ValueError):
    pass


class DimensionError(ValueError):
    """Fields or kernels built on different grids were combined."""


class UnsupportedFunctionalError(ValueError):
    pass


class InvalidEpsilonError(ValueError):
    pass


class InvalidRegimeError(ValueError):
    """The parameters do not satisfy the hypotheses of the requested theorem."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class IncompatibilityError(ValueError):
    """Two trajectories do not share a grid or a time partition."""


class InvalidComparisonError(ValueError):
    pass


class TimeRangeError(ValueError):
    pass


class TruncationError(RuntimeError):
    """The computed solution left the truncation band ``[-R, R]``."""


class NonconvergenceError(RuntimeError):
    """An iterative solve hit its iteration cap.

    Attributes
    ----------
    iterate : ndarray or None
        Last iterate reached.
    residual : float
        Residual at ``iterate``.
    history : list
        Residual history (outer fixed-point loop) when available.
    """

    def __init__(self, message, iterate=None, residual=float("nan"), history=None):
        super().__init__(message)
        self.iterate = iterate
        self.residual = residual
        self.history = list(history or [])


class ConfigError(ValueError):
    """Configuration could not be parsed or validated.

    ``errors`` holds one human-readable message per problem, with line
    references where the offending key can be located in the source text.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))
