"""Activation functions shared by the kernel recursion and the finite-width simulator."""

from enum import Enum
from typing import Union

import numpy as np
from scipy import special

from ..exceptions import ConfigError, DomainError

ArrayLike = Union[float, np.ndarray]


class ActivationKind(Enum):
    """Supported activations, named as in spec files."""
    RELU = "relu"
    ERF = "erf"
    TANH = "tanh"
    IDENTITY = "identity"

    def __str__(self):
        return self.value

    @property
    def is_smooth(self) -> bool:
        """True when phi is differentiable everywhere."""
        return self is not ActivationKind.RELU


def parse_activation(name: str) -> ActivationKind:
    """Map a lowercase config name to its ActivationKind."""
    try:
        return ActivationKind(str(name).strip().lower())
    except ValueError:
        names = ", ".join(k.value for k in ActivationKind)
        raise ConfigError(f"unknown activation '{name}', expected one of {names}", key="activation")


def apply_activation(kind: ActivationKind, u: np.ndarray) -> np.ndarray:
    """Elementwise phi(u) without the finiteness check (hot loops)."""
    if kind is ActivationKind.RELU:
        return np.maximum(u, 0.0)
    if kind is ActivationKind.ERF:
        # scipy.special.erf: Cephes rational approximations, |error| ~ 1e-16.
        return special.erf(u)
    if kind is ActivationKind.TANH:
        return np.tanh(u)
    return np.asarray(u, dtype=float)


def eval_activation(kind: ActivationKind, u: ArrayLike) -> ArrayLike:
    """
    Evaluate phi(u).

    Args:
        kind: Activation to apply
        u: Scalar or array of finite reals

    Returns:
        phi(u), a float for scalar input and an array otherwise

    Raises:
        DomainError: if any input is NaN or infinite
    """
    arr = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{kind} activation requires finite input")
    out = apply_activation(kind, arr)
    if np.ndim(u) == 0:
        return float(out)
    return out
