"""Kernel-ridge view of the posterior mean: RKHS inner products and the ridge objective."""

import numpy as np

from ..exceptions import DimensionMismatchError
from ..kernel.recursion import cross_gram
from ..kernel.spec import KernelSpec
from .gp import TrainedModel


def rkhs_inner(points1, coeffs1, points2, coeffs2, spec: KernelSpec) -> float:
    """
    <f, g> for f = sum_m c1_m k(p1_m, .) and g = sum_m c2_m k(p2_m, .).

    Args:
        points1: (M1, d_in) centres of f
        coeffs1: (M1,) coefficients of f
        points2: (M2, d_in) centres of g
        coeffs2: (M2,) coefficients of g
        spec: Kernel spec
    """
    c1 = np.asarray(coeffs1, dtype=float).ravel()
    c2 = np.asarray(coeffs2, dtype=float).ravel()
    P1 = np.atleast_2d(np.asarray(points1, dtype=float))
    P2 = np.atleast_2d(np.asarray(points2, dtype=float))
    if P1.shape[0] != c1.shape[0] or P2.shape[0] != c2.shape[0]:
        raise DimensionMismatchError(
            f"points/coefficients mismatch: {P1.shape[0]}/{c1.shape[0]} and {P2.shape[0]}/{c2.shape[0]}"
        )
    K12 = cross_gram(spec, P1, P2)
    return float(c1 @ K12 @ c2)


def rkhs_norm_sq(model: TrainedModel) -> float:
    """||Delta_NN||^2 = beta^T K beta, summed over outputs."""
    B = model.beta.reshape(model.data.n_samples, -1)
    return float(np.sum(B * (model.gram @ B)))


def krr_objective(model: TrainedModel, candidate_beta) -> float:
    """
    ||y - h - K beta||^2 + noise_var * beta^T K beta for a candidate beta.

    The model's fitted beta minimizes this over all candidates.
    """
    beta = np.asarray(candidate_beta, dtype=float)
    r = model.residual.reshape(model.data.n_samples, -1)
    if beta.shape[0] != r.shape[0]:
        raise DimensionMismatchError(f"candidate has {beta.shape[0]} rows, model has {r.shape[0]} points")
    B = beta.reshape(r.shape)
    KB = model.gram @ B
    misfit = r - KB
    return float(np.sum(misfit * misfit) + model.noise_var * np.sum(B * KB))
