"""Exception hierarchy shared by the library and the command-line interface."""

from typing import Optional


class NNGPError(Exception):
    """Base class for all nngp errors."""

    exit_code = 1


class ConfigError(NNGPError):
    """A spec or config file could not be parsed or validated."""

    exit_code = 2

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class DataError(NNGPError):
    """A CSV payload is malformed."""

    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"{message} (line {line})" if line is not None else message)


class BarronSpecError(NNGPError):
    """A Barron sampler description is invalid or lacks what an operation needs."""

    exit_code = 2


class DomainError(NNGPError, ValueError):
    """An input lies outside the domain of a function."""

    exit_code = 3


class UnsupportedCombinationError(NNGPError):
    """A closed-form expectation was requested where none is implemented."""

    exit_code = 3


class NumericalError(NNGPError):
    """Numerical state violates an invariant beyond tolerance."""

    exit_code = 3


class NonPSDError(NumericalError):
    """Cholesky factorization failed even at the largest jitter."""

    def __init__(self, message: str, min_eigenvalue: float):
        self.min_eigenvalue = min_eigenvalue
        super().__init__(f"{message} (min eigenvalue estimate {min_eigenvalue:.6g})")


class OptimizationError(NumericalError):
    """Every evaluation of the hyperparameter search failed."""


class ModelIntegrityError(NNGPError):
    """A persisted model does not satisfy its stored invariants."""

    exit_code = 4


class DimensionMismatchError(NNGPError, ValueError):
    """Array shapes do not match the dimensions an operation expects."""

    exit_code = 2
