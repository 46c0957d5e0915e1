"""
Layerwise propagation of the mean function h and covariance function k of the
induced Gaussian process, from the first layer to the network output.

Every public entry point runs the same batched engine, ``_propagate``, on a
stacked point set: diagonals of all points plus an explicit list of point
pairs. Each pair is propagated on its own, so a kernel entry never depends on
which other pairs were evaluated alongside it.
"""

from dataclasses import dataclass
import math
from typing import Tuple

import numpy as np

from ..exceptions import DimensionMismatchError, NumericalError
from ..utils.logger import get_kernel_logger
from ..utils.rng import check_seed, stream
from .activation import ActivationKind, apply_activation
from .gauss_expect import RHO_TOLERANCE, ExpectationMethod, expect_phi_batch, expect_phi_pair_batch
from .measures import Empirical, FirstLayerMeasure
from .spec import KernelSpec, LayerHyperparams

logger = get_kernel_logger()

# Relative slack on |k12| <= sqrt(k11 k22), the same as on correlations.
CAUCHY_SCHWARZ_SLACK = RHO_TOLERANCE

# Upper bound on elements of the (points x atoms) feature blocks.
_FEATURE_BLOCK = 1 << 22


@dataclass(frozen=True)
class PairState:
    """Mean and covariance of a pre-activation pair at one layer."""

    h1: float
    h2: float
    k11: float
    k22: float
    k12: float

    def __post_init__(self):
        values = (self.h1, self.h2, self.k11, self.k22, self.k12)
        if not all(math.isfinite(v) for v in values):
            raise NumericalError(f"pair state must be finite, got {values}")
        if self.k11 < 0 or self.k22 < 0:
            raise NumericalError(f"negative variance in pair state ({self.k11}, {self.k22})")
        bound = math.sqrt(self.k11 * self.k22)
        if abs(self.k12) > bound * (1.0 + CAUCHY_SCHWARZ_SLACK) + 1e-12 * (max(self.k11, self.k22) + 1.0):
            raise NumericalError(
                f"covariance {self.k12} violates Cauchy-Schwarz with variances {self.k11}, {self.k22}"
            )


def _as_points(X, d_in: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != d_in:
        raise DimensionMismatchError(f"expected points with {d_in} coordinates, got shape {X.shape}")
    if X.shape[0] < 1:
        raise DimensionMismatchError("need at least one point")
    if not np.all(np.isfinite(X)):
        raise DimensionMismatchError("points must be finite")
    return X


# --------------------------------------------------------------------------- single-pair operations


def first_layer_state(spec: KernelSpec, x, x2) -> PairState:
    """
    Exact first and second moments of (w^T x, w^T x2) under the first-layer measure.

    For a gaussian measure this is the state the recursion starts from. For other
    measures it is informational only: the step into layer 2 integrates over the
    measure directly.
    """
    x = _as_points(x, spec.d_in)[0]
    x2 = _as_points(x2, spec.d_in)[0]
    return PairState(*spec.pi.pre_activation_moments(x, x2))


def layer_step(state: PairState, bias_mu: float, bias_var: float, next: LayerHyperparams,
               kind: ActivationKind, method: ExpectationMethod) -> PairState:
    """
    One step of the recursion, from layer l - 1 to layer l.

    Args:
        state: Pre-activation law (h, k) at layer l - 1
        bias_mu: Mean of the bias added at layer l - 1
        bias_var: Variance of that bias, added to every covariance entry
        next: Hyperparameters of layer l
        kind: Activation
        method: How the Gaussian expectations are evaluated

    Returns:
        The pre-activation law at layer l
    """
    m = np.array([state.h1, state.h2]) + bias_mu
    v = np.array([state.k11, state.k22]) + bias_var
    h = _mean_factor(m, v, next, kind, method)
    diag = next.var_w * expect_phi_pair_batch(m, m, v, v, v, kind, method)
    cross = next.var_w * expect_phi_pair_batch(m[0], m[1], v[0], v[1], state.k12 + bias_var, kind, method)
    return PairState(float(h[0]), float(h[1]), float(diag[0]), float(diag[1]), float(cross))


def _mean_factor(m, v, layer: LayerHyperparams, kind, method) -> np.ndarray:
    if layer.mu_w == 0.0:
        return np.zeros_like(m)
    return layer.mu_w * expect_phi_batch(m, v, kind, method)


# --------------------------------------------------------------------------- batched engine


def _first_layer_gaussian(spec: KernelSpec, P: np.ndarray, left: np.ndarray, right: np.ndarray):
    # Sums run coordinate by coordinate, so each entry depends only on its own points.
    pi = spec.pi
    total = np.zeros(P.shape[0])
    sq = np.zeros(P.shape[0])
    cross = np.zeros(left.shape[0])
    for j in range(P.shape[1]):
        col = P[:, j]
        total += col
        sq += col * col
        cross += col[left] * col[right]
    return pi.mu_w * total, pi.var_w * sq, pi.var_w * cross


def _pre_activations(P: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    pre = np.broadcast_to(b, (P.shape[0], b.shape[0])).copy()
    for j in range(P.shape[1]):
        pre += P[:, j, None] * W[None, :, j]
    return pre


def _measure_step(spec: KernelSpec, P: np.ndarray, left: np.ndarray, right: np.ndarray):
    """Step into layer 2 by direct summation over the atoms of a non-gaussian measure."""
    W, b, p = spec.pi.atoms(spec.d_in, spec.seed)
    layer = spec.layers[0]
    n_points, n_pairs = P.shape[0], left.shape[0]
    use_gram = n_pairs > 2 * n_points

    mean = np.zeros(n_points)
    sq = np.zeros(n_points)
    if use_gram:
        G = np.zeros((n_points, n_points))
        width = max(1, _FEATURE_BLOCK // max(n_points, 1))
    else:
        cross = np.zeros(n_pairs)
        width = max(1, _FEATURE_BLOCK // (n_points + n_pairs))

    for start in range(0, W.shape[0], width):
        stop = min(start + width, W.shape[0])
        feats = apply_activation(spec.activation, _pre_activations(P, W[start:stop], b[start:stop]))
        pw = p[start:stop]
        mean += feats @ pw
        sq += (feats * feats) @ pw
        if use_gram:
            G += (feats * pw) @ feats.T
        else:
            cross += (feats[left] * feats[right]) @ pw

    if use_gram:
        cross = 0.5 * (G[left, right] + G[right, left])
    h = _mean_factor_from(mean, layer)
    return h, layer.var_w * sq, layer.var_w * cross


def _mean_factor_from(expectation: np.ndarray, layer: LayerHyperparams) -> np.ndarray:
    if layer.mu_w == 0.0:
        return np.zeros_like(expectation)
    return layer.mu_w * expectation


def _gaussian_step(h, kdiag, koff, left, right, bias, layer: LayerHyperparams, spec: KernelSpec):
    bias_mu, bias_var = bias
    m = h + bias_mu
    v = kdiag + bias_var
    h_next = _mean_factor(m, v, layer, spec.activation, spec.method)
    diag = layer.var_w * expect_phi_pair_batch(m, m, v, v, v, spec.activation, spec.method)
    off = layer.var_w * expect_phi_pair_batch(
        m[left], m[right], v[left], v[right], koff + bias_var, spec.activation, spec.method
    )
    return h_next, diag, off


def _propagate(spec: KernelSpec, P: np.ndarray, left: np.ndarray, right: np.ndarray):
    """
    Output-layer h on every point, k on every diagonal and on each listed pair.

    Returns:
        (h (n_points,), kdiag (n_points,), koff (n_pairs,))
    """
    left = np.asarray(left, dtype=np.intp)
    right = np.asarray(right, dtype=np.intp)
    if spec.pi.is_gaussian:
        h, kdiag, koff = _first_layer_gaussian(spec, P, left, right)
        remaining = spec.layers
    else:
        h, kdiag, koff = _measure_step(spec, P, left, right)
        remaining = spec.layers[1:]

    l = spec.depth + 1 - len(remaining)
    for layer in remaining:
        h, kdiag, koff = _gaussian_step(h, kdiag, koff, left, right, spec.bias_moments(l), layer, spec)
        l += 1
    return h, kdiag, koff


# --------------------------------------------------------------------------- public kernel operations


def kernel_value(spec: KernelSpec, x, x2) -> Tuple[float, float, float]:
    """
    Evaluate the induced GP at a pair of inputs.

    Returns:
        (h_NN(x), h_NN(x2), k_NN(x, x2))
    """
    P = np.vstack([_as_points(x, spec.d_in), _as_points(x2, spec.d_in)])
    h, _, koff = _propagate(spec, P, np.array([0]), np.array([1]))
    return float(h[0]), float(h[1]), float(koff[0])


def gram(spec: KernelSpec, X) -> Tuple[np.ndarray, np.ndarray]:
    """
    Prior mean vector and Gram matrix of a point set.

    The upper triangle is propagated once per pair and mirrored, so K is exactly
    symmetric.

    Args:
        spec: Kernel spec
        X: (M, d_in) points

    Returns:
        (h_vec (M,), K (M, M))
    """
    X = _as_points(X, spec.d_in)
    M = X.shape[0]
    left, right = np.triu_indices(M, k=1)
    logger.debug(f"Gram of {M} points: {left.shape[0]} off-diagonal pairs, depth {spec.depth}")
    h, kdiag, koff = _propagate(spec, X, left, right)
    K = np.diag(kdiag)
    K[left, right] = koff
    K[right, left] = koff
    return h, K


def cross_kernel(spec: KernelSpec, X, z) -> Tuple[np.ndarray, float, np.ndarray, float]:
    """
    Kernel column between a point set and a single probe.

    Returns:
        (h(X) (M,), h(z), k(X, z) (M,), k(z, z))
    """
    X = _as_points(X, spec.d_in)
    z = _as_points(z, spec.d_in)
    M = X.shape[0]
    P = np.vstack([X, z])
    h, kdiag, koff = _propagate(spec, P, np.arange(M), np.full(M, M))
    return h[:M], float(h[M]), koff, float(kdiag[M])


def two_layer_kernel(pi: FirstLayerMeasure, kind: ActivationKind, x, x2, samples: int,
                     seed: int) -> Tuple[float, float]:
    """
    E_pi[phi(w^T x + b) phi(w^T x2 + b)], the kernel of a two-layer network.

    An empirical measure is summed exactly over its atoms (stderr 0); any other
    measure is sampled ``samples`` times.

    Returns:
        (estimate, stderr)
    """
    x = np.asarray(x, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x.shape != x2.shape:
        raise DimensionMismatchError(f"inputs differ in length: {x.shape[0]} and {x2.shape[0]}")
    d_in = x.shape[0]
    if isinstance(pi, Empirical):
        W, b, p = pi.atoms(d_in, seed)
        values = apply_activation(kind, W @ x + b) * apply_activation(kind, W @ x2 + b)
        return float(p @ values), 0.0

    if samples < 1:
        raise NumericalError(f"need at least one sample, got {samples}")
    check_seed(seed)
    W, b = pi.sample(samples, d_in, stream(seed, "two_layer", 0))
    values = apply_activation(kind, W @ x + b) * apply_activation(kind, W @ x2 + b)
    if samples == 1:
        return float(values[0]), math.inf
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(samples))


def cross_gram(spec: KernelSpec, X1, X2) -> np.ndarray:
    """Kernel matrix K12[i, j] = k_NN(X1[i], X2[j])."""
    X1 = _as_points(X1, spec.d_in)
    X2 = _as_points(X2, spec.d_in)
    M1, M2 = X1.shape[0], X2.shape[0]
    left, right = np.meshgrid(np.arange(M1), M1 + np.arange(M2), indexing="ij")
    _, _, koff = _propagate(spec, np.vstack([X1, X2]), left.ravel(), right.ravel())
    return koff.reshape(M1, M2)
