"""Exception types shared across the package."""

import numpy as np


class NeupdeError(Exception):
    """Base class for all package errors."""


class DegenerateData(NeupdeError):
    """Data range collapses to a point (max == min)."""


class DimensionMismatch(NeupdeError, ValueError):
    pass


class NonFiniteState(NeupdeError, FloatingPointError):
    """Integration produced NaN or Inf.

    ``interval`` is the index of the data interval in which the failure
    happened (``None`` when not known).
    """

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class TooShort(NeupdeError, ValueError):
    pass


class Divergence(NeupdeError):
    """Training skipped too many steps to be trusted."""


class UnstableStep(NeupdeError):
    pass


class RankTooLarge(NeupdeError, ValueError):
    pass


class SingularSystem(NeupdeError, np.linalg.LinAlgError):
    pass


class ConfigError(NeupdeError, ValueError):
    pass
