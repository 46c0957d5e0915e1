"""
Derivative-free maximization of the log marginal likelihood over kernel
hyperparameters and the noise variance.

Variance-type parameters are searched in log space, means as they are.
"""

from dataclasses import dataclass, field
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy import optimize

from ..config import get_settings
from ..data.dataset import Dataset
from ..exceptions import ConfigError, NNGPError, OptimizationError
from ..kernel.spec import KernelSpec
from ..utils.logger import get_regression_logger
from ..utils.rng import MAX_SEED, stream
from .gp import fit, model_log_marginal_likelihood

logger = get_regression_logger()

NOISE = "noise"


def _default_restarts() -> int:
    return get_settings().optimizer_restarts


def _default_max_evals() -> int:
    return get_settings().optimizer_max_evals


def _default_min_noise() -> float:
    return get_settings().min_noise_var


class OptimizerConfig(BaseModel):
    """Search settings for optimize_hyperparams."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    free: Tuple[str, ...] = ()
    noise_var: float = Field(1e-2, ge=0, allow_inf_nan=False)
    restarts: int = Field(default_factory=_default_restarts, ge=1)
    max_evals: int = Field(default_factory=_default_max_evals, ge=1)
    seed: int = Field(0, ge=0, le=MAX_SEED)
    min_noise_var: float = Field(default_factory=_default_min_noise, gt=0)
    restart_scale: float = Field(1.0, ge=0, allow_inf_nan=False)


@dataclass(frozen=True)
class TraceEntry:
    restart: int
    evaluation: int
    params: Dict[str, float]
    lml: float


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    spec: KernelSpec
    noise_var: float
    lml: float
    trace: List[TraceEntry] = field(default_factory=list)

    @property
    def initial_lml(self) -> float:
        return self.trace[0].lml

    def trace_frame(self) -> pd.DataFrame:
        """One row per evaluation, with the best-so-far column."""
        rows = [
            {"restart": t.restart, "evaluation": t.evaluation, **t.params, "lml": t.lml}
            for t in self.trace
        ]
        df = pd.DataFrame(rows)
        df["best_lml"] = df["lml"].cummax()
        return df


def _is_log_param(name: str) -> bool:
    return name == NOISE or name.rsplit(".", 1)[-1].startswith("var")


class _Objective:
    """Maps transformed vectors to (spec, noise) and records every evaluation."""

    def __init__(self, template: KernelSpec, data: Dataset, search: OptimizerConfig):
        self.template = template
        self.data = data
        self.search = search
        self.names = list(search.free)
        self.log_mask = np.array([_is_log_param(n) for n in self.names], dtype=bool)
        self.trace: List[TraceEntry] = []
        self.restart = 0

    def initial_point(self) -> np.ndarray:
        values = []
        for name in self.names:
            value = self.search.noise_var if name == NOISE else self.template.get_param(name)
            if _is_log_param(name):
                value = math.log(max(value, self.search.min_noise_var))
            values.append(value)
        return np.array(values, dtype=float)

    def decode(self, t: np.ndarray) -> Dict[str, float]:
        params = {}
        for name, value, is_log in zip(self.names, t, self.log_mask):
            params[name] = math.exp(min(value, 700.0)) if is_log else float(value)
        if NOISE in params:
            params[NOISE] = max(params[NOISE], self.search.min_noise_var)
        return params

    def evaluate(self, params: Dict[str, float]) -> float:
        kernel_params = {k: v for k, v in params.items() if k != NOISE}
        noise = params.get(NOISE, self.search.noise_var)
        try:
            spec = self.template.with_params(kernel_params) if kernel_params else self.template
            lml = model_log_marginal_likelihood(fit(spec, self.data, noise))
        except NNGPError as e:
            logger.debug(f"Evaluation failed at {params}: {e}")
            lml = -math.inf
        if not math.isfinite(lml):
            lml = -math.inf
        self.trace.append(TraceEntry(self.restart, len(self.trace), dict(params), lml))
        return lml

    def __call__(self, t: np.ndarray) -> float:
        lml = self.evaluate(self.decode(t))
        return -lml if math.isfinite(lml) else math.inf


def optimize_hyperparams(template: KernelSpec, data: Dataset,
                         search: Optional[OptimizerConfig] = None) -> OptimizationResult:
    """
    Maximize the log marginal likelihood with restarted Nelder-Mead.

    Restart 0 starts at the template; later restarts perturb that point by
    ``restart_scale`` standard normals in the transformed space, drawn from the
    search seed. The best evaluation across all restarts is returned.

    Args:
        template: Spec holding the starting hyperparameters
        data: Training data
        search: Free parameters and search settings; defaults to the template's
            ``free`` list

    Returns:
        OptimizationResult with the best spec, noise variance, LML and full trace

    Raises:
        OptimizationError: every evaluation failed
    """
    if search is None:
        search = OptimizerConfig(free=template.free)
    valid = set(template.param_names()) | {NOISE}
    for name in search.free:
        if name not in valid:
            raise ConfigError(f"'{name}' is not a tunable hyperparameter of this spec", key="optimize")

    objective = _Objective(template, data, search)
    if not objective.names:
        lml = objective.evaluate({})
        if not math.isfinite(lml):
            raise OptimizationError("the only evaluation failed")
        return OptimizationResult(template, search.noise_var, lml, objective.trace)

    x0 = objective.initial_point()
    for restart in range(search.restarts):
        objective.restart = restart
        start = x0
        if restart > 0:
            start = x0 + search.restart_scale * stream(search.seed, "restart", restart).standard_normal(x0.shape)
        res = optimize.minimize(
            objective,
            start,
            method="Nelder-Mead",
            options={"maxfev": search.max_evals, "xatol": 1e-6, "fatol": 1e-9},
        )
        best_here = max(t.lml for t in objective.trace if t.restart == restart)
        logger.info(f"Restart {restart}: {res.nfev} evaluations, best LML {best_here:.6g}")

    best = max(objective.trace, key=lambda t: t.lml)
    if not math.isfinite(best.lml):
        raise OptimizationError(f"all {len(objective.trace)} evaluations failed")

    kernel_params = {k: v for k, v in best.params.items() if k != NOISE}
    spec = template.with_params(kernel_params) if kernel_params else template
    noise = best.params.get(NOISE, search.noise_var)
    logger.info(f"Best LML {best.lml:.6g} after {len(objective.trace)} evaluations: {best.params}")
    return OptimizationResult(spec, noise, best.lml, objective.trace)
