"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operands have mismatched shapes or an invalid size."""


class SingularError(ArithmeticError):
    """A denominator is zero or below the singularity guard."""


class DivergenceError(ArithmeticError):
    """An iterate or map output contains non-finite values."""


class ConvergenceError(RuntimeError):
    """An iterative routine hit its iteration limit.

    The best estimate found so far is available as ``best_estimate``.
    """

    def __init__(self, message: str, best_estimate: float):
        super().__init__(message)
        self.best_estimate = best_estimate


class ConfigError(ValueError):
    """Invalid configuration or parameter value."""


class MetricError(ValueError):
    """A quality metric is undefined for the given inputs."""


class ImageIOError(OSError):
    """Reading or writing an image file failed."""
