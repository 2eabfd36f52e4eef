"""Exception types raised by the d2oc library."""


class D2ocError(Exception):
    """Base class for all library errors."""


class NoRelativeDegree(D2ocError):
    """No output relative degree found within the probe limit."""


class DimensionMismatch(D2ocError, ValueError):
    pass


class NoLiveSamples(D2ocError):
    """Every reference sample weight is at or below the live threshold."""


class DegenerateWeights(D2ocError, ValueError):
    pass


class InfeasibleMarginals(D2ocError, ValueError):
    pass


class NotPositiveDefinite(D2ocError):
    pass


class UndefinedRatio(D2ocError):
    """The nominal error norm is too small for the ratio to be meaningful."""


class LengthMismatch(D2ocError, ValueError):
    pass


class NotSymmetric(D2ocError, ValueError):
    pass


class NoContraction(D2ocError):
    """Contraction factor is >= 1, so the ultimate bound does not exist."""


class ConfigError(D2ocError, ValueError):
    pass
