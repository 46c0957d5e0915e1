"""Finite-width fully-connected networks: sampling under the prior and forward evaluation."""

from dataclasses import dataclass
import math
from typing import Sequence, Tuple

import numpy as np

from ..exceptions import ConfigError, DimensionMismatchError
from ..kernel.activation import ActivationKind, apply_activation
from ..kernel.measures import sample_l1_sphere_batch
from ..kernel.spec import KernelSpec
from ..utils.rng import stream


@dataclass(frozen=True, eq=False)
class NetworkSample:
    """
    One concrete network.

    ``weights[l - 1]`` is the N_l x N_{l-1} matrix of layer l = 1..L+1 and
    ``biases[l - 1]`` its bias vector; the output bias is zero. A bias enters
    inside the activation: x^[l] = phi(W^[l] x^[l-1] + b^[l]).
    """

    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    activation: ActivationKind

    def __post_init__(self):
        weights = tuple(np.atleast_2d(np.asarray(W, dtype=float)) for W in self.weights)
        biases = tuple(np.asarray(b, dtype=float).ravel() for b in self.biases)
        if len(weights) < 2:
            raise DimensionMismatchError("a network needs at least one hidden layer and an output layer")
        if len(biases) != len(weights):
            raise DimensionMismatchError(f"{len(weights)} weight matrices but {len(biases)} bias vectors")
        for l in range(1, len(weights)):
            if weights[l].shape[1] != weights[l - 1].shape[0]:
                raise DimensionMismatchError(
                    f"layer {l + 1} expects {weights[l].shape[1]} inputs, layer {l} has {weights[l - 1].shape[0]} units"
                )
        for l, (W, b) in enumerate(zip(weights, biases), start=1):
            if b.shape[0] != W.shape[0]:
                raise DimensionMismatchError(f"layer {l} has {W.shape[0]} units but {b.shape[0]} biases")
        if np.any(biases[-1] != 0.0):
            raise DimensionMismatchError("the output layer has no bias")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @classmethod
    def from_arrays(cls, weights: Sequence, biases: Sequence, activation: ActivationKind) -> "NetworkSample":
        """Build a hand-set network; a missing output bias is filled with zeros."""
        weights = [np.atleast_2d(np.asarray(W, dtype=float)) for W in weights]
        biases = [np.asarray(b, dtype=float).ravel() for b in biases]
        if len(biases) == len(weights) - 1:
            biases.append(np.zeros(weights[-1].shape[0]))
        return cls(tuple(weights), tuple(biases), activation)

    @property
    def depth(self) -> int:
        return len(self.weights) - 1

    @property
    def widths(self) -> Tuple[int, ...]:
        return tuple(W.shape[0] for W in self.weights[:-1])

    @property
    def d_in(self) -> int:
        return self.weights[0].shape[1]

    @property
    def d_out(self) -> int:
        return self.weights[-1].shape[0]


def forward(net: NetworkSample, x) -> np.ndarray:
    """
    Exact forward pass.

    Args:
        net: Network
        x: (d_in,) input or (P, d_in) batch

    Returns:
        (d_out,) for a single input, (P, d_out) for a batch
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    a = x[None, :] if single else x
    if a.ndim != 2 or a.shape[1] != net.d_in:
        raise DimensionMismatchError(f"network expects inputs of length {net.d_in}, got shape {x.shape}")
    for W, b in zip(net.weights[:-1], net.biases[:-1]):
        a = apply_activation(net.activation, a @ W.T + b)
    out = a @ net.weights[-1].T
    return out[0] if single else out


def check_widths(widths: Sequence[int], depth: int) -> Tuple[int, ...]:
    widths = tuple(int(n) for n in widths)
    if len(widths) != depth:
        raise ConfigError(f"expected {depth} hidden widths, got {len(widths)}", key="widths")
    if any(n < 1 for n in widths):
        raise ConfigError(f"widths must be positive, got {widths}", key="widths")
    return widths


def sample_network(spec: KernelSpec, widths: Sequence[int], d_out: int, seed: int) -> NetworkSample:
    """
    Draw a network from the prior that induces ``spec``.

    First-layer rows come from the first-layer measure. Layer l >= 2 weights are
    i.i.d. N(mu_w / N_{l-1}, var_w / N_{l-1}) and hidden biases N(mu_b, var_b).
    Each layer draws from its own stream of ``seed``.
    """
    widths = check_widths(widths, spec.depth)
    if d_out < 1:
        raise ConfigError(f"d_out must be >= 1, got {d_out}", key="d_out")
    units = (*widths, d_out)

    W1, b1 = spec.pi.sample(units[0], spec.d_in, stream(seed, "network", 1))
    weights = [W1]
    biases = [b1]
    for l in range(2, spec.depth + 2):
        hp = spec.layer(l)
        rng = stream(seed, "network", l)
        fan_in = units[l - 2]
        W = rng.normal(hp.mu_w / fan_in, math.sqrt(hp.var_w / fan_in), size=(units[l - 1], fan_in))
        if l == spec.depth + 1:
            b = np.zeros(d_out)
        else:
            b = rng.normal(hp.mu_b, math.sqrt(hp.var_b), size=units[l - 1])
        weights.append(W)
        biases.append(b)
    return NetworkSample(tuple(weights), tuple(biases), spec.activation)


def sample_l1_sphere(d_in: int, seed: int) -> Tuple[np.ndarray, float]:
    """One uniform point (w, b) on the unit l1-sphere in R^(d_in+1)."""
    W, b = sample_l1_sphere_batch(d_in, 1, stream(seed, "l1sphere", 0))
    return W[0], float(b[0])
