"""First-layer measures pi: the law of a first-layer neuron's (w, b)."""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
import math
from typing import Optional, Tuple

import numpy as np

from ..config import get_settings
from ..exceptions import ConfigError, DimensionMismatchError
from ..utils.rng import stream

# Tolerance on the l1 norm of points that must lie on the l1-sphere.
L1_SPHERE_TOL = 1e-12


class MeasureKind(Enum):
    GAUSSIAN = "gaussian"
    L1SPHERE = "l1sphere"
    EMPIRICAL = "empirical"

    def __str__(self):
        return self.value


def sample_l1_sphere_batch(d_in: int, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw n points uniformly (cone measure) from the unit l1-sphere in R^(d_in+1).

    Magnitudes follow a symmetric Dirichlet(1, ..., 1), i.e. uniform on the simplex,
    and each coordinate gets an independent random sign.

    Returns:
        (W, b) with W of shape (n, d_in) and b of shape (n,)
    """
    if d_in < 1:
        raise DimensionMismatchError(f"d_in must be >= 1, got {d_in}")
    dim = d_in + 1
    magnitudes = rng.dirichlet(np.ones(dim), size=n)
    signs = rng.integers(0, 2, size=(n, dim)) * 2 - 1
    points = magnitudes * signs
    return points[:, :d_in], points[:, d_in]


def l1_sphere_second_moment(d_in: int) -> float:
    """E[c_i^2] for one coordinate of the uniform l1-sphere point: 2 / (D (D + 1))."""
    dim = d_in + 1
    return 2.0 / (dim * (dim + 1))


def _check_points(x: np.ndarray, d_in: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != d_in:
        raise DimensionMismatchError(f"expected a vector of length {d_in}, got shape {x.shape}")
    return x


class FirstLayerMeasure(ABC):
    """Law of (w, b) for every first-layer neuron."""

    kind: MeasureKind

    @property
    def is_gaussian(self) -> bool:
        return self.kind is MeasureKind.GAUSSIAN

    @abstractmethod
    def sample(self, n: int, d_in: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """Draw n i.i.d. neurons, returned as (W (n, d_in), b (n,))."""

    @abstractmethod
    def pre_activation_moments(self, x, x2) -> Tuple[float, float, float, float, float]:
        """Exact (mean(x), mean(x2), var(x), var(x2), cov) of w^T x under pi."""

    @abstractmethod
    def bias_moments(self, d_in: int) -> Tuple[float, float]:
        """Mean and variance of b under pi."""

    def atoms(self, d_in: int, seed: int, samples: Optional[int] = None):
        """Weighted atoms (W, b, p) representing pi for direct integration."""
        n = samples or 1
        W, b = self.sample(n, d_in, stream(seed, "measure", 0))
        return W, b, np.full(n, 1.0 / n)


@dataclass(frozen=True)
class GaussianIID(FirstLayerMeasure):
    """Weights i.i.d. N(mu_w, var_w) per entry and bias N(mu_b, var_b); no 1/d_in scaling."""

    var_w: float = 1.0
    var_b: float = 0.0
    mu_w: float = 0.0
    mu_b: float = 0.0
    kind: MeasureKind = field(default=MeasureKind.GAUSSIAN, init=False)

    def __post_init__(self):
        for name in ("var_w", "var_b", "mu_w", "mu_b"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite", key=f"pi.{name}")
        if self.var_w < 0 or self.var_b < 0:
            raise ConfigError("variances must be >= 0", key="pi.var_w" if self.var_w < 0 else "pi.var_b")

    def sample(self, n, d_in, rng):
        W = rng.normal(self.mu_w, math.sqrt(self.var_w), size=(n, d_in))
        b = rng.normal(self.mu_b, math.sqrt(self.var_b), size=n)
        return W, b

    def pre_activation_moments(self, x, x2):
        x = np.asarray(x, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        return (
            self.mu_w * float(np.sum(x)),
            self.mu_w * float(np.sum(x2)),
            self.var_w * float(np.dot(x, x)),
            self.var_w * float(np.dot(x2, x2)),
            self.var_w * float(np.dot(x, x2)),
        )

    def bias_moments(self, d_in):
        return self.mu_b, self.var_b


@dataclass(frozen=True)
class L1SphereUniform(FirstLayerMeasure):
    """Uniform law on the unit l1-sphere of (w, b); ``samples`` draws represent it in the kernel."""

    samples: Optional[int] = None
    kind: MeasureKind = field(default=MeasureKind.L1SPHERE, init=False)

    def sample(self, n, d_in, rng):
        return sample_l1_sphere_batch(d_in, n, rng)

    def pre_activation_moments(self, x, x2):
        x = np.asarray(x, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        c = l1_sphere_second_moment(x.shape[0])
        return 0.0, 0.0, c * float(np.dot(x, x)), c * float(np.dot(x2, x2)), c * float(np.dot(x, x2))

    def bias_moments(self, d_in):
        return 0.0, l1_sphere_second_moment(d_in)

    def atoms(self, d_in, seed, samples=None):
        n = samples or self.samples or get_settings().measure_samples
        return super().atoms(d_in, seed, n)


@dataclass(frozen=True, eq=False)
class Empirical(FirstLayerMeasure):
    """Finitely supported measure: atoms (w_i, b_i) with probabilities p_i."""

    weights_w: np.ndarray
    biases: np.ndarray
    probs: np.ndarray
    source: Optional[str] = None
    kind: MeasureKind = field(default=MeasureKind.EMPIRICAL, init=False)

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.weights_w, dtype=float))
        b = np.asarray(self.biases, dtype=float).ravel()
        p = np.asarray(self.probs, dtype=float).ravel()
        if W.shape[0] < 1:
            raise ConfigError("empirical measure needs at least one atom", key="pi.atoms")
        if b.shape[0] != W.shape[0] or p.shape[0] != W.shape[0]:
            raise ConfigError("atom weights, biases and probabilities disagree in length", key="pi.atoms")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b)) and np.all(np.isfinite(p))):
            raise ConfigError("atoms must be finite", key="pi.atoms")
        if np.any(p < 0) or abs(float(np.sum(p)) - 1.0) > 1e-12:
            raise ConfigError(f"atom probabilities must be >= 0 and sum to 1, got sum {np.sum(p)!r}", key="pi.atoms")
        object.__setattr__(self, "weights_w", W)
        object.__setattr__(self, "biases", b)
        object.__setattr__(self, "probs", p)

    @classmethod
    def point_mass(cls, w, b: float) -> "Empirical":
        return cls(np.atleast_2d(np.asarray(w, dtype=float)), np.array([float(b)]), np.array([1.0]))

    @property
    def d_in(self) -> int:
        return self.weights_w.shape[1]

    def sample(self, n, d_in, rng):
        if d_in != self.d_in:
            raise DimensionMismatchError(f"atoms have dimension {self.d_in}, network expects {d_in}")
        idx = rng.choice(self.probs.shape[0], size=n, p=self.probs)
        return self.weights_w[idx].copy(), self.biases[idx].copy()

    def pre_activation_moments(self, x, x2):
        x = _check_points(x, self.d_in)
        x2 = _check_points(x2, self.d_in)
        z1 = self.weights_w @ x
        z2 = self.weights_w @ x2
        h1 = float(self.probs @ z1)
        h2 = float(self.probs @ z2)
        return (
            h1,
            h2,
            max(float(self.probs @ (z1 * z1)) - h1 * h1, 0.0),
            max(float(self.probs @ (z2 * z2)) - h2 * h2, 0.0),
            float(self.probs @ (z1 * z2)) - h1 * h2,
        )

    def bias_moments(self, d_in):
        mean = float(self.probs @ self.biases)
        return mean, max(float(self.probs @ (self.biases ** 2)) - mean * mean, 0.0)

    def atoms(self, d_in, seed, samples=None):
        if d_in != self.d_in:
            raise DimensionMismatchError(f"atoms have dimension {self.d_in}, spec expects {d_in}")
        return self.weights_w, self.biases, self.probs

    def on_l1_sphere(self) -> bool:
        norms = np.abs(self.weights_w).sum(axis=1) + np.abs(self.biases)
        return bool(np.all(np.abs(norms - 1.0) <= L1_SPHERE_TOL))
