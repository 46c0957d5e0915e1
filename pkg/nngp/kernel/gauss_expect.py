"""
One- and two-point Gaussian expectations of an activation.

E[phi(u)] for u ~ N(m, v) and E[phi(u) phi(v)] for a bivariate normal pair,
computed three ways:

* Analytic: closed forms for Identity, zero-mean ReLU (arc-cosine kernel) and
  zero-mean Erf (arcsine kernel).
* Quadrature: the pair is whitened, u = m1 + s1*z1, v = m2 + s2*(rho*z1 + sqrt(1-rho^2)*z2)
  with z1, z2 iid N(0, 1). ``nodes`` is the Gauss-Legendre node count per panel.

  - Identity: tensor Gauss-Hermite, exact on the quadratic integrand.
  - Erf: the inner integral is closed form, E[erf(a + b z)] = erf(a / sqrt(1 + 2b^2)),
    leaving a 1-D composite Gauss-Legendre rule in z1.
  - Tanh: iterated composite Gauss-Legendre. Panels break on a fixed grid over
    |z| <= SMOOTH_HALF_WIDTH and around each sigmoid switch, at -m/s and -m/s +- 2/s.
  - ReLU: Gauss-Legendre on the part of |z| <= QUAD_HALF_WIDTH where both factors
    are positive, split where the inner limit bends.

  For Tanh and ReLU, nearly perfectly correlated pairs (and pairs with a zero
  variance) use the 1-D rule along the common direction.
* Monte Carlo: chunked Philox streams keyed by (seed, chunk index); chunk
  statistics are merged in chunk order.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
import math
from typing import Optional, Tuple

import numpy as np

from ..config import get_settings
from ..exceptions import ConfigError, NumericalError, UnsupportedCombinationError
from ..utils import get_kernel_logger
from ..utils.rng import check_seed, stream
from .activation import ActivationKind, apply_activation

logger = get_kernel_logger()

# Pairs with |rho| above this are integrated along their common direction.
DEGENERATE_RHO = 1.0 - 1e-12
# Correlations further than this outside [-1, 1] signal an upstream bug.
RHO_TOLERANCE = 1e-8
# Truncation of the whitened domain for the Gauss-Legendre rule; mass beyond is < 1e-22.
QUAD_HALF_WIDTH = 10.0
# Bounded activations: Gaussian mass beyond |z| = SMOOTH_HALF_WIDTH is below 2e-15.
SMOOTH_HALF_WIDTH = 8.0
_PANEL_GRID = np.array([-8.0, -4.0, -2.0, 0.0, 2.0, 4.0, 8.0])
# In units of the transition width 1/s.
_TRANSITION_OFFSETS = np.array([-2.0, 0.0, 2.0])
# Upper bound on array elements materialized per vectorized block.
_BLOCK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class GaussianMoments:
    """Law N(mean, variance) of a scalar pre-activation."""

    mean: float
    variance: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.variance)):
            raise NumericalError("Gaussian moments must be finite")
        if self.variance < 0:
            raise NumericalError(f"variance must be >= 0, got {self.variance}")


@dataclass(frozen=True)
class BivariateGaussianMoments:
    """Law of a pre-activation pair: two means, two variances and a covariance."""

    mean1: float
    mean2: float
    var1: float
    var2: float
    cov: float

    def __post_init__(self):
        values = (self.mean1, self.mean2, self.var1, self.var2, self.cov)
        if not all(math.isfinite(v) for v in values):
            raise NumericalError("bivariate moments must be finite")
        if self.var1 < 0 or self.var2 < 0:
            raise NumericalError(f"variances must be >= 0, got {self.var1}, {self.var2}")
        correlation(np.array([self.cov]), np.array([self.var1]), np.array([self.var2]))

    def swap(self) -> "BivariateGaussianMoments":
        """The same law with the two coordinates exchanged."""
        return BivariateGaussianMoments(self.mean2, self.mean1, self.var2, self.var1, self.cov)

    @property
    def rho(self) -> float:
        """Clamped correlation (0 when a variance vanishes)."""
        return float(correlation(np.array([self.cov]), np.array([self.var1]), np.array([self.var2]))[0])


class MethodTag(Enum):
    ANALYTIC = "analytic"
    QUADRATURE = "quadrature"
    MONTE_CARLO = "montecarlo"


@dataclass(frozen=True)
class ExpectationMethod:
    """How expectations are evaluated, with the parameters of that method."""

    tag: MethodTag
    nodes: int = 64
    samples: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if self.tag is MethodTag.QUADRATURE and self.nodes < 2:
            raise ConfigError(f"quadrature needs at least 2 nodes, got {self.nodes}", key="quad_nodes")
        if self.tag is MethodTag.MONTE_CARLO:
            if self.samples < 1:
                raise ConfigError(f"Monte Carlo needs at least 1 sample, got {self.samples}", key="mc_samples")
            check_seed(self.seed)

    @classmethod
    def analytic(cls) -> "ExpectationMethod":
        return cls(MethodTag.ANALYTIC)

    @classmethod
    def quadrature(cls, nodes: Optional[int] = None) -> "ExpectationMethod":
        return cls(MethodTag.QUADRATURE, nodes=get_settings().quad_nodes if nodes is None else nodes)

    @classmethod
    def monte_carlo(cls, samples: Optional[int] = None, seed: int = 0) -> "ExpectationMethod":
        samples = get_settings().mc_samples if samples is None else samples
        return cls(MethodTag.MONTE_CARLO, samples=samples, seed=seed)

    @classmethod
    def parse(cls, text: str) -> "ExpectationMethod":
        """Parse ``analytic``, ``quad:64`` or ``mc:1000000[:seed]``."""
        parts = [p.strip() for p in str(text).strip().lower().split(":")]
        try:
            if parts[0] in ("analytic", "exact"):
                return cls.analytic()
            if parts[0] in ("quad", "quadrature"):
                return cls.quadrature(int(parts[1]) if len(parts) > 1 else None)
            if parts[0] in ("mc", "montecarlo"):
                samples = int(parts[1]) if len(parts) > 1 else None
                seed = int(parts[2]) if len(parts) > 2 else 0
                return cls.monte_carlo(samples, seed)
        except ValueError:
            pass
        raise ConfigError(f"cannot parse expectation method '{text}'", key="method")

    def __str__(self):
        if self.tag is MethodTag.QUADRATURE:
            return f"quad:{self.nodes}"
        if self.tag is MethodTag.MONTE_CARLO:
            return f"mc:{self.samples}:{self.seed}"
        return "analytic"


# --------------------------------------------------------------------------- helpers


def correlation(cov: np.ndarray, var1: np.ndarray, var2: np.ndarray) -> np.ndarray:
    """
    Correlation cov / sqrt(var1 * var2), clamped to [-1, 1].

    A vanishing variance gives correlation 0 (the covariance must then vanish too).

    Raises:
        NumericalError: if a correlation exceeds 1 by more than RHO_TOLERANCE
    """
    cov = np.asarray(cov, dtype=float)
    denom = np.sqrt(np.asarray(var1, dtype=float) * np.asarray(var2, dtype=float))
    positive = denom > 0
    rho = np.zeros(np.broadcast(cov, denom).shape)
    np.divide(cov, denom, out=rho, where=positive)
    scale = np.maximum(np.abs(var1), np.abs(var2)) + 1.0
    if np.any(~positive & (np.abs(cov) > 1e-12 * scale)):
        raise NumericalError("nonzero covariance with a zero variance")
    if np.any(np.abs(rho) > 1.0 + RHO_TOLERANCE):
        worst = float(np.max(np.abs(rho)))
        raise NumericalError(f"correlation {worst:.12g} outside [-1, 1] beyond tolerance")
    return np.clip(rho, -1.0, 1.0)


def _canonical(m1, m2, v1, v2):
    """Order each pair so (m1, v1) <= (m2, v2); swapped inputs then compute identically."""
    swap = (m1 > m2) | ((m1 == m2) & (v1 > v2))
    return (np.where(swap, m2, m1), np.where(swap, m1, m2),
            np.where(swap, v2, v1), np.where(swap, v1, v2))


def _validate_moments(var: np.ndarray, *others: np.ndarray) -> None:
    if not all(np.all(np.isfinite(a)) for a in (var, *others)):
        raise NumericalError("Gaussian moments must be finite")
    if np.any(var < 0):
        raise NumericalError(f"variance must be >= 0, got {float(np.min(var))}")


@lru_cache(maxsize=32)
def _hermite_rule(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for E[f(z)], z ~ N(0, 1)."""
    x, w = np.polynomial.hermite.hermgauss(nodes)
    return math.sqrt(2.0) * x, w / math.sqrt(math.pi)


@lru_cache(maxsize=32)
def _legendre_rule(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(nodes)


def _legendre_on(lo: np.ndarray, hi: np.ndarray, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights mapped onto [lo, hi] (broadcast over a trailing axis)."""
    x, w = _legendre_rule(nodes)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    return mid[..., None] + half[..., None] * x, half[..., None] * w


def _std_normal_pdf(z: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def _blocks(n_items: int, per_item: int):
    """Slices over n_items so that each block materializes <= _BLOCK_ELEMENTS values."""
    step = max(1, _BLOCK_ELEMENTS // max(per_item, 1))
    for start in range(0, n_items, step):
        yield slice(start, min(n_items, start + step))


# --------------------------------------------------------------------------- analytic


def _require_zero_mean(kind: ActivationKind, *means: np.ndarray) -> None:
    if any(np.any(m != 0.0) for m in means):
        raise UnsupportedCombinationError(
            f"no closed form for {kind} with nonzero mean; use quadrature or montecarlo"
        )


def _analytic_mean(mean, var, kind):
    if kind is ActivationKind.IDENTITY:
        return mean.copy()
    if kind is ActivationKind.RELU:
        _require_zero_mean(kind, mean)
        return np.sqrt(var / (2.0 * math.pi))
    if kind is ActivationKind.ERF:
        _require_zero_mean(kind, mean)
        return np.zeros_like(var)
    raise UnsupportedCombinationError(f"no closed form for {kind}")


def _analytic_pair(m1, m2, v1, v2, cov, kind):
    if kind is ActivationKind.IDENTITY:
        return cov + m1 * m2
    if kind is ActivationKind.RELU:
        # Arc-cosine kernel of degree one.
        _require_zero_mean(kind, m1, m2)
        rho = correlation(cov, v1, v2)
        theta = np.arccos(rho)
        j = np.sqrt(1.0 - rho * rho) + (math.pi - theta) * rho
        return np.sqrt(v1 * v2) * j / (2.0 * math.pi)
    if kind is ActivationKind.ERF:
        # Arcsine kernel.
        _require_zero_mean(kind, m1, m2)
        arg = 2.0 * cov / np.sqrt((1.0 + 2.0 * v1) * (1.0 + 2.0 * v2))
        return (2.0 / math.pi) * np.arcsin(np.clip(arg, -1.0, 1.0))
    raise UnsupportedCombinationError(f"no closed form for {kind}")


# --------------------------------------------------------------------------- quadrature


def _panel_count(transitions: int) -> int:
    """Panels of the composite rule with ``transitions`` refined transitions."""
    return _PANEL_GRID.size - 1 + _TRANSITION_OFFSETS.size * transitions


def _transition_breaks(center: np.ndarray, width: np.ndarray) -> np.ndarray:
    """Breakpoints around the switch of phi(m + s z) at z = -m/s, of width 1/s."""
    with np.errstate(invalid="ignore"):
        pts = center[..., None] + width[..., None] * _TRANSITION_OFFSETS
    pts = np.nan_to_num(pts, nan=0.0, posinf=SMOOTH_HALF_WIDTH, neginf=-SMOOTH_HALF_WIDTH)
    return np.clip(pts, -SMOOTH_HALF_WIDTH, SMOOTH_HALF_WIDTH)


def _panel_rule(nodes: int, *transitions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Composite Gauss-Legendre rule on |z| <= SMOOTH_HALF_WIDTH.

    Panels break at the fixed grid and at every transition breakpoint; each panel
    gets ``nodes`` nodes. Coincident breakpoints give empty panels with zero weight.
    """
    shape = transitions[0].shape[:-1]
    grid = np.broadcast_to(_PANEL_GRID, shape + _PANEL_GRID.shape)
    breaks = np.sort(np.concatenate([grid, *transitions], axis=-1), axis=-1)
    z, w = _legendre_on(breaks[..., :-1], breaks[..., 1:], nodes)
    return z.reshape(shape + (-1,)), w.reshape(shape + (-1,))


def _quad_mean(mean, var, kind, nodes):
    sd = np.sqrt(var)
    if kind is ActivationKind.IDENTITY:
        return mean.copy()
    if kind.is_smooth:
        out = np.empty_like(mean)
        with np.errstate(divide="ignore", invalid="ignore"):
            center, width = -mean / sd, 1.0 / sd
        for blk in _blocks(mean.size, _panel_count(1) * nodes):
            z, w = _panel_rule(nodes, _transition_breaks(center[blk], width[blk]))
            u = mean[blk, None] + sd[blk, None] * z
            out[blk] = np.sum(w * apply_activation(kind, u) * _std_normal_pdf(z), axis=-1)
        return out

    # ReLU: integrate (m + s z) phi(z) over z > -m/s.
    out = np.maximum(mean, 0.0)
    live = sd > 0
    if np.any(live):
        m, s = mean[live], sd[live]
        lo = np.clip(-m / s, -QUAD_HALF_WIDTH, QUAD_HALF_WIDTH)
        z, w = _legendre_on(lo, np.full_like(lo, QUAD_HALF_WIDTH), nodes)
        vals = np.sum(w * (m[:, None] + s[:, None] * z) * _std_normal_pdf(z), axis=-1)
        out[live] = vals
    return out


def _identity_pair(m1, m2, s1, s2, rho, nodes):
    # Gauss-Hermite is exact on the quadratic integrand.
    z, p = _hermite_rule(nodes)
    out = np.empty_like(m1)
    c = np.sqrt(np.maximum(1.0 - rho * rho, 0.0))
    pp = np.outer(p, p)
    for blk in _blocks(m1.size, nodes * nodes):
        u = m1[blk, None, None] + s1[blk, None, None] * z[None, :, None]
        v = m2[blk, None, None] + s2[blk, None, None] * (
            rho[blk, None, None] * z[None, :, None] + c[blk, None, None] * z[None, None, :]
        )
        out[blk] = np.sum(u * v * pp, axis=(1, 2))
    return out


def _erf_pair(m1, m2, s1, s2, rho, nodes):
    # E[erf(a + b z2)] = erf(a / sqrt(1 + 2 b^2)) removes the inner integral.
    c = np.sqrt(np.maximum(1.0 - rho * rho, 0.0))
    g = np.sqrt(1.0 + 2.0 * (s2 * c) ** 2)
    a2, b2 = m2 / g, s2 * rho / g
    with np.errstate(divide="ignore", invalid="ignore"):
        centers = (-m1 / s1, -a2 / b2)
        widths = (1.0 / s1, 1.0 / np.abs(b2))
    out = np.empty_like(m1)
    for blk in _blocks(m1.size, _panel_count(2) * nodes):
        z, w = _panel_rule(nodes, *(_transition_breaks(t[blk], h[blk]) for t, h in zip(centers, widths)))
        u = m1[blk, None] + s1[blk, None] * z
        v = a2[blk, None] + b2[blk, None] * z
        vals = apply_activation(ActivationKind.ERF, u) * apply_activation(ActivationKind.ERF, v)
        out[blk] = np.sum(w * vals * _std_normal_pdf(z), axis=-1)
    return out


def _sigmoid_pair(m1, m2, s1, s2, rho, kind, nodes):
    out = np.empty_like(m1)
    degenerate = (np.abs(rho) > DEGENERATE_RHO) | (s1 == 0) | (s2 == 0)

    idx = np.flatnonzero(~degenerate)
    if idx.size:
        a1, a2, b1, b2, r = m1[idx], m2[idx], s1[idx], s2[idx], rho[idx]
        sigma = b2 * np.sqrt(1.0 - r * r)
        # E[phi(v) | z1] switches where the conditional mean of v crosses 0.
        with np.errstate(divide="ignore", invalid="ignore"):
            centers = (-a1 / b1, -a2 / (b2 * r))
            widths = (1.0 / b1, np.sqrt(1.0 + sigma * sigma) / (b2 * np.abs(r)))
        per_item = _panel_count(2) * _panel_count(1) * nodes * nodes
        for blk in _blocks(idx.size, per_item):
            z1, w1 = _panel_rule(nodes, *(_transition_breaks(t[blk], h[blk]) for t, h in zip(centers, widths)))
            shift = a2[blk, None] + (b2 * r)[blk, None] * z1
            sg = sigma[blk, None]
            z2, w2 = _panel_rule(nodes, _transition_breaks(-shift / sg, np.broadcast_to(1.0 / sg, shift.shape)))
            v = shift[..., None] + sg[..., None] * z2
            inner = np.sum(w2 * apply_activation(kind, v) * _std_normal_pdf(z2), axis=-1)
            u = a1[blk, None] + b1[blk, None] * z1
            out[idx[blk]] = np.sum(w1 * apply_activation(kind, u) * inner * _std_normal_pdf(z1), axis=-1)

    idx = np.flatnonzero(degenerate)
    if idx.size:
        logger.debug(f"{idx.size} degenerate pair(s) integrated along the common direction")
        a1, a2, b1 = m1[idx], m2[idx], s1[idx]
        b2 = s2[idx] * np.where(rho[idx] < 0, -1.0, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            centers = (-a1 / b1, -a2 / b2)
            widths = (1.0 / b1, 1.0 / np.abs(b2))
        z, w = _panel_rule(nodes, *(_transition_breaks(t, h) for t, h in zip(centers, widths)))
        u = a1[:, None] + b1[:, None] * z
        v = a2[:, None] + b2[:, None] * z
        vals = apply_activation(kind, u) * apply_activation(kind, v)
        out[idx] = np.sum(w * vals * _std_normal_pdf(z), axis=-1)
    return out


def _relu_pair(m1, m2, s1, s2, rho, nodes):
    zmax = QUAD_HALF_WIDTH
    out = np.zeros_like(m1)
    degenerate = (np.abs(rho) > DEGENERATE_RHO) | (s1 == 0) | (s2 == 0)

    idx = np.flatnonzero(~degenerate)
    for blk in _blocks(idx.size, 2 * nodes * nodes):
        i = idx[blk]
        c = np.sqrt(1.0 - rho[i] ** 2)
        a1, a2, b1, b2, r = m1[i], m2[i], s1[i], s2[i], rho[i]
        top = np.full_like(a1, zmax)
        lo = np.clip(-a1 / b1, -zmax, zmax)
        # E[relu(v) | z1] bends where the conditional mean of v crosses 0; split there.
        with np.errstate(divide="ignore", invalid="ignore"):
            bend = np.where(r != 0, -a2 / (b2 * r), lo)
        bend = np.clip(np.where(np.isnan(bend), lo, bend), lo, top)
        total = np.zeros_like(a1)
        for start, stop in ((lo, bend), (bend, top)):
            z1, w1 = _legendre_on(start, stop, nodes)                      # (B, n)
            u = a1[:, None] + b1[:, None] * z1
            shift = a2[:, None] + b2[:, None] * r[:, None] * z1             # v = shift + b2*c*z2
            lo2 = np.clip(-shift / (b2[:, None] * c[:, None]), -zmax, zmax)
            z2, w2 = _legendre_on(lo2, np.full_like(lo2, zmax), nodes)     # (B, n, n)
            v = shift[..., None] + (b2 * c)[:, None, None] * z2
            inner = np.sum(w2 * v * _std_normal_pdf(z2), axis=-1)          # E[relu(v) | z1]
            total += np.sum(w1 * u * inner * _std_normal_pdf(z1), axis=-1)
        out[i] = total

    idx = np.flatnonzero(degenerate)
    if idx.size:
        logger.debug(f"{idx.size} degenerate ReLU pair(s) integrated along the common direction")
        a1, a2, b1, b2 = m1[idx], m2[idx], s1[idx], s2[idx]
        d = np.where(rho[idx] < 0, -1.0, 1.0)
        lo = np.full_like(a1, -zmax)
        hi = np.full_like(a1, zmax)
        # u = a1 + b1 z > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            lo = np.where(b1 > 0, np.maximum(lo, -a1 / b1), lo)
            dead = (b1 == 0) & (a1 <= 0)
            # v = a2 + b2 d z > 0
            t2 = -a2 / b2
            lo = np.where((b2 > 0) & (d > 0), np.maximum(lo, t2), lo)
            hi = np.where((b2 > 0) & (d < 0), np.minimum(hi, -t2), hi)
            dead |= (b2 == 0) & (a2 <= 0)
        dead |= hi <= lo
        hi = np.where(dead, lo, hi)
        z, w = _legendre_on(lo, hi, nodes)
        u = a1[:, None] + b1[:, None] * z
        v = a2[:, None] + (b2 * d)[:, None] * z
        vals = np.sum(w * u * v * _std_normal_pdf(z), axis=-1)
        out[idx] = np.where(dead, 0.0, vals)
    return out


def _quad_pair(m1, m2, v1, v2, cov, kind, nodes):
    rho = correlation(cov, v1, v2)
    s1, s2 = np.sqrt(v1), np.sqrt(v2)
    if kind is ActivationKind.IDENTITY:
        return _identity_pair(m1, m2, s1, s2, rho, nodes)
    if kind is ActivationKind.ERF:
        return _erf_pair(m1, m2, s1, s2, rho, nodes)
    if kind is ActivationKind.TANH:
        return _sigmoid_pair(m1, m2, s1, s2, rho, kind, nodes)
    return _relu_pair(m1, m2, s1, s2, rho, nodes)


# --------------------------------------------------------------------------- Monte Carlo


def _mc_stats(draw_values, n_items: int, samples: int, seed: int, width: int):
    """
    Stream Monte Carlo chunks and merge per-item running mean / M2 in chunk order.

    ``draw_values(z, blk)`` maps a (width, size) block of standard normals to the
    (items, size) values of the integrand for the items in ``blk``.
    """
    chunk = get_settings().mc_chunk
    count = 0
    mean = np.zeros(n_items)
    m2 = np.zeros(n_items)
    for c, start in enumerate(range(0, samples, chunk)):
        size = min(chunk, samples - start)
        z = stream(seed, "expectation", c).standard_normal((width, size))
        c_mean = np.empty(n_items)
        c_m2 = np.empty(n_items)
        for blk in _blocks(n_items, size):
            vals = draw_values(z, blk)
            c_mean[blk] = vals.mean(axis=1)
            c_m2[blk] = np.sum((vals - c_mean[blk, None]) ** 2, axis=1)
        total = count + size
        delta = c_mean - mean
        mean = mean + delta * (size / total)
        m2 = m2 + c_m2 + delta * delta * (count * size / total)
        count = total
    if samples > 1:
        stderr = np.sqrt(m2 / (samples - 1) / samples)
    else:
        stderr = np.full(n_items, np.inf)
    return mean, stderr


def _mc_mean(mean, var, kind, samples, seed):
    sd = np.sqrt(var)

    def values(z, blk):
        return apply_activation(kind, mean[blk, None] + sd[blk, None] * z[0])

    return _mc_stats(values, mean.size, samples, seed, width=1)


def _mc_pair(m1, m2, v1, v2, cov, kind, samples, seed):
    rho = correlation(cov, v1, v2)
    s1, s2 = np.sqrt(v1), np.sqrt(v2)
    c = np.sqrt(1.0 - rho * rho)

    def values(z, blk):
        u = m1[blk, None] + s1[blk, None] * z[0]
        v = m2[blk, None] + s2[blk, None] * (rho[blk, None] * z[0] + c[blk, None] * z[1])
        return apply_activation(kind, u) * apply_activation(kind, v)

    return _mc_stats(values, m1.size, samples, seed, width=2)


# --------------------------------------------------------------------------- batch API


def expect_phi_batch(mean, var, kind: ActivationKind, method: ExpectationMethod) -> np.ndarray:
    """
    Vectorized E[phi(u)], u ~ N(mean, var), elementwise over broadcast inputs.

    Raises:
        UnsupportedCombinationError: Analytic requested outside its closed-form set
        NumericalError: invalid moments
    """
    mean, var = np.broadcast_arrays(np.asarray(mean, dtype=float), np.asarray(var, dtype=float))
    shape = mean.shape
    mean, var = mean.ravel().copy(), var.ravel().copy()
    _validate_moments(var, mean)
    if method.tag is MethodTag.ANALYTIC:
        out = _analytic_mean(mean, var, kind)
    elif method.tag is MethodTag.QUADRATURE:
        out = _quad_mean(mean, var, kind, method.nodes)
    else:
        out, _ = _mc_mean(mean, var, kind, method.samples, method.seed)
    return out.reshape(shape)


def expect_phi_pair_batch(mean1, mean2, var1, var2, cov, kind: ActivationKind,
                          method: ExpectationMethod) -> np.ndarray:
    """
    Vectorized E[phi(u) phi(v)] for bivariate normal pairs, elementwise.

    Each pair is put in canonical order first, so swapping the two coordinates
    gives bit-identical results for every method.
    """
    arrays = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (mean1, mean2, var1, var2, cov)))
    shape = arrays[0].shape
    m1, m2, v1, v2, cov = (a.ravel().copy() for a in arrays)
    _validate_moments(np.concatenate([v1, v2]), m1, m2, cov)
    m1, m2, v1, v2 = _canonical(m1, m2, v1, v2)
    if method.tag is MethodTag.ANALYTIC:
        out = _analytic_pair(m1, m2, v1, v2, cov, kind)
    elif method.tag is MethodTag.QUADRATURE:
        out = _quad_pair(m1, m2, v1, v2, cov, kind, method.nodes)
    else:
        out, _ = _mc_pair(m1, m2, v1, v2, cov, kind, method.samples, method.seed)
    return out.reshape(shape)


# --------------------------------------------------------------------------- scalar API


def expect_phi(m: GaussianMoments, kind: ActivationKind, method: ExpectationMethod) -> float:
    """E[phi(u)] for u ~ N(m.mean, m.variance)."""
    return float(expect_phi_batch(m.mean, m.variance, kind, method))


def expect_phi_pair(m: BivariateGaussianMoments, kind: ActivationKind,
                    method: ExpectationMethod) -> float:
    """E[phi(u) phi(v)] under the bivariate normal law ``m``."""
    return float(expect_phi_pair_batch(m.mean1, m.mean2, m.var1, m.var2, m.cov, kind, method))


def mc_expect_pair(m: BivariateGaussianMoments, kind: ActivationKind, samples: int,
                   seed: int) -> Tuple[float, float]:
    """
    Monte Carlo estimate of E[phi(u) phi(v)] with its standard error.

    Args:
        m: Law of the pair
        kind: Activation
        samples: Number of draws (>= 1)
        seed: 64-bit unsigned seed; the estimate is a pure function of it

    Returns:
        (estimate, stderr) with stderr = sample std / sqrt(samples)
    """
    if samples < 1:
        raise ConfigError(f"Monte Carlo needs at least 1 sample, got {samples}", key="samples")
    check_seed(seed)
    m1, m2, v1, v2 = _canonical(*(np.array([x]) for x in (m.mean1, m.mean2, m.var1, m.var2)))
    est, err = _mc_pair(m1, m2, v1, v2, np.array([m.cov]), kind, samples, seed)
    return float(est[0]), float(err[0])
