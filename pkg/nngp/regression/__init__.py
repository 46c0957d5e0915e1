"""GP regression, hyperparameter search, kernel-ridge view and model files."""

from .gp import (
    TrainedModel,
    fit,
    posterior_mean,
    posterior_cov,
    predict,
    log_marginal_likelihood,
    model_log_marginal_likelihood,
    jitter_cholesky,
)
from .optimizer import OptimizerConfig, OptimizationResult, TraceEntry, optimize_hyperparams
from .rkhs import rkhs_inner, rkhs_norm_sq, krr_objective
from .persistence import save_model, load_model, dump_model, parse_model

__all__ = [
    "TrainedModel",
    "fit",
    "posterior_mean",
    "posterior_cov",
    "predict",
    "log_marginal_likelihood",
    "model_log_marginal_likelihood",
    "jitter_cholesky",
    "OptimizerConfig",
    "OptimizationResult",
    "TraceEntry",
    "optimize_hyperparams",
    "rkhs_inner",
    "rkhs_norm_sq",
    "krr_objective",
    "save_model",
    "load_model",
    "dump_model",
    "parse_model",
]
