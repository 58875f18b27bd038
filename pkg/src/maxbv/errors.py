"""Semantic exception types shared across the toolkit."""


class MaxBVError(Exception):
    """Base error for this package."""


class GridMismatchError(MaxBVError, ValueError):
    """Two grid-bound objects were combined but live on different grids."""


class NonFiniteStatisticError(MaxBVError, ArithmeticError):
    """A Monte Carlo statistic produced NaN or infinity.

    Carries the seed of the offending stream so the failure can be replayed.
    """

    def __init__(self, message: str, master_seed: int, stream_index: int):
        super().__init__(message)
        self.master_seed = master_seed
        self.stream_index = stream_index


class InsufficientSamplesError(MaxBVError, RuntimeError):
    """A conditioned or kernel-weighted estimator saw too few effective samples."""


class QuadratureError(MaxBVError, RuntimeError):
    """Adaptive quadrature failed to reach its requested accuracy."""


class ConfigError(MaxBVError, ValueError):
    """An experiment configuration failed validation."""
