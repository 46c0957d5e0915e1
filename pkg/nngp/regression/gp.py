"""
Exact Gaussian-process regression with the induced kernel.

Targets may be a vector or an (M, d_out) matrix; the outputs are independent
GPs sharing one Gram matrix and one Cholesky factor.
"""

from dataclasses import dataclass
import math
from typing import Tuple, Union

import numpy as np
from scipy import linalg

from ..config import get_settings
from ..data.dataset import Dataset
from ..exceptions import DimensionMismatchError, NonPSDError, NumericalError
from ..kernel.recursion import cross_kernel, gram, kernel_value
from ..kernel.spec import KernelSpec
from ..utils.logger import get_regression_logger

logger = get_regression_logger()

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """Frozen regression state after conditioning on a dataset."""

    spec: KernelSpec
    data: Dataset
    noise_var: float
    chol: np.ndarray
    beta: np.ndarray
    h_train: np.ndarray
    jitter_used: float
    gram: np.ndarray

    @property
    def residual(self) -> np.ndarray:
        """y - h_NN(X), shaped like y."""
        return centered_targets(self.data, self.h_train)

    @property
    def d_out(self) -> int:
        return self.data.d_out


def centered_targets(data: Dataset, h: np.ndarray) -> np.ndarray:
    if data.y.ndim == 1:
        return data.y - h
    return data.y - h[:, None]


def regularized(K: np.ndarray, noise_var: float, jitter: float) -> np.ndarray:
    """K + (noise_var + jitter) I."""
    A = K.copy()
    A[np.diag_indices_from(A)] += noise_var + jitter
    return A


def jitter_cholesky(K: np.ndarray, noise_var: float) -> Tuple[np.ndarray, float]:
    """
    Lower Cholesky factor of K + noise_var I, adding diagonal jitter if needed.

    Jitter starts at ``jitter_start * mean(diag K)`` and grows tenfold up to
    ``jitter_max * mean(diag K)``.

    Returns:
        (L, jitter) with L L^T = K + (noise_var + jitter) I

    Raises:
        NonPSDError: the factorization failed at the largest jitter
    """
    if not np.all(np.isfinite(K)):
        raise NumericalError("Gram matrix has non-finite entries")
    try:
        return linalg.cholesky(regularized(K, noise_var, 0.0), lower=True), 0.0
    except linalg.LinAlgError:
        pass

    settings = get_settings()
    scale = float(np.mean(np.diag(K)))
    rel = settings.jitter_start
    while scale > 0 and rel <= settings.jitter_max * (1 + 1e-9):
        jitter = rel * scale
        try:
            L = linalg.cholesky(regularized(K, noise_var, jitter), lower=True)
            logger.warning(f"Cholesky needed jitter {jitter:.3g} ({rel:.0e} x mean diag K)")
            return L, jitter
        except linalg.LinAlgError:
            rel *= 10.0

    min_eig = float(linalg.eigvalsh(regularized(K, noise_var, 0.0), subset_by_index=[0, 0])[0])
    raise NonPSDError(f"K + {noise_var:.3g} I is not positive definite even with maximum jitter", min_eig)


def _check_noise(noise_var: float) -> float:
    noise_var = float(noise_var)
    if not math.isfinite(noise_var) or noise_var < 0:
        raise NumericalError(f"noise variance must be finite and >= 0, got {noise_var}")
    return noise_var


def _check_data(spec: KernelSpec, data: Dataset) -> None:
    if data.d_in != spec.d_in:
        raise DimensionMismatchError(f"data has {data.d_in} input columns, spec expects d_in = {spec.d_in}")


def fit(spec: KernelSpec, data: Dataset, noise_var: float) -> TrainedModel:
    """
    Condition the induced GP prior on a dataset.

    Args:
        spec: Kernel spec
        data: Training data
        noise_var: Observation noise variance (0 allowed)

    Returns:
        TrainedModel with beta = (K + noise_var I)^-1 (y - h)

    Raises:
        NonPSDError: factorization failed at maximum jitter
    """
    noise_var = _check_noise(noise_var)
    _check_data(spec, data)
    h, K = gram(spec, data.X)
    L, jitter = jitter_cholesky(K, noise_var)
    beta = linalg.cho_solve((L, True), centered_targets(data, h))
    logger.debug(f"Fitted M={data.n_samples} d_out={data.d_out} noise={noise_var:.3g} jitter={jitter:.3g}")
    return TrainedModel(spec, data, noise_var, L, beta, h, jitter, K)


def _probe_column(model: TrainedModel, z) -> Tuple[float, np.ndarray, float]:
    _, hz, kcol, kzz = cross_kernel(model.spec, model.data.X, z)
    return hz, kcol, kzz


def _mean_from(model: TrainedModel, hz: float, kcol: np.ndarray) -> Union[float, np.ndarray]:
    mean = hz + kcol @ model.beta
    return float(mean) if np.ndim(mean) == 0 else mean


def _whiten(model: TrainedModel, kcol: np.ndarray) -> np.ndarray:
    return linalg.solve_triangular(model.chol, kcol, lower=True)


def posterior_mean(model: TrainedModel, x) -> Union[float, np.ndarray]:
    """
    h_NN(x) + k_NN(X, x)^T beta.

    Returns a float for single-output models and a (d_out,) array otherwise.
    """
    hz, kcol, _ = _probe_column(model, x)
    return _mean_from(model, hz, kcol)


def posterior_cov(model: TrainedModel, x, x2) -> float:
    """k_NN(x, x2) - k_NN(X, x)^T (K + noise I)^-1 k_NN(X, x2)."""
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x.shape == x2.shape and np.array_equal(x, x2):
        _, kcol, kzz = _probe_column(model, x)
        v = _whiten(model, kcol)
        return float(kzz - v @ v)
    _, kcol1, _ = _probe_column(model, x)
    _, kcol2, _ = _probe_column(model, x2)
    _, _, k12 = kernel_value(model.spec, x, x2)
    return float(k12 - _whiten(model, kcol1) @ _whiten(model, kcol2))


def predict(model: TrainedModel, Z) -> Tuple[np.ndarray, np.ndarray]:
    """
    Posterior means and variances on a probe set.

    Each probe is evaluated exactly as posterior_mean / posterior_cov would, so
    batch and pointwise results are bit-identical.

    Returns:
        (means (P,) or (P, d_out), variances (P,))
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[1] != model.spec.d_in:
        raise DimensionMismatchError(f"probes have {Z.shape[1]} columns, spec expects d_in = {model.spec.d_in}")
    means = []
    variances = np.empty(Z.shape[0])
    for p, z in enumerate(Z):
        hz, kcol, kzz = _probe_column(model, z)
        means.append(_mean_from(model, hz, kcol))
        v = _whiten(model, kcol)
        variances[p] = kzz - v @ v
    return np.array(means, dtype=float), variances


def model_log_marginal_likelihood(model: TrainedModel) -> float:
    """Log marginal likelihood of the training targets, summed over outputs."""
    r = model.residual.reshape(model.data.n_samples, -1)
    alpha = model.beta.reshape(r.shape)
    M, d_out = r.shape
    quad = float(np.sum(r * alpha))
    logdet = 2.0 * float(np.sum(np.log(np.diag(model.chol))))
    return -0.5 * quad - 0.5 * d_out * logdet - 0.5 * d_out * M * LOG_2PI


def log_marginal_likelihood(spec: KernelSpec, data: Dataset, noise_var: float) -> float:
    """
    log p(y | X, theta, noise_var) of the induced GP.

    Raises:
        NonPSDError: factorization failed at maximum jitter
    """
    return model_log_marginal_likelihood(fit(spec, data, noise_var))
