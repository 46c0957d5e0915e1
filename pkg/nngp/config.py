"""Configuration management for the NNGP toolkit."""

from functools import lru_cache
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Runtime defaults loaded from environment variables (prefix ``NNGP_``)."""

    # Logging
    log_level: str = Field(default="INFO", description="Log level for all nngp loggers")
    log_file: Optional[str] = Field(default=None, description="Optional log file path")
    run_log_dir: str = Field(default="logs/runs", description="Directory for experiment run journals")

    # Gaussian expectations
    quad_nodes: int = Field(default=64, ge=2, description="Nodes per axis for quadrature")
    mc_samples: int = Field(default=1_000_000, ge=1, description="Monte Carlo draws per expectation")
    mc_chunk: int = Field(default=65_536, ge=1, description="Draws per Monte Carlo stream chunk")
    measure_samples: int = Field(default=100_000, ge=1, description="Draws from a continuous first-layer measure")

    # Linear algebra
    jitter_start: float = Field(default=1e-10, gt=0, description="First jitter, relative to mean diag K")
    jitter_max: float = Field(default=1e-4, gt=0, description="Largest jitter, relative to mean diag K")

    # Hyperparameter search
    optimizer_restarts: int = Field(default=3, ge=1, description="Nelder-Mead restarts")
    optimizer_max_evals: int = Field(default=500, ge=1, description="Evaluations per restart")
    min_noise_var: float = Field(default=1e-12, gt=0, description="Noise floor inside the optimizer")

    # Simulation
    n_jobs: int = Field(default=1, description="joblib workers for ensembles")
    bootstrap_resamples: int = Field(default=1000, ge=1, description="Bootstrap resamples for ratio intervals")

    # Output
    csv_digits: int = Field(default=17, ge=1, le=17, description="Significant digits in CSV output")

    model_config = {
        "env_prefix": "NNGP_",
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "case_sensitive": False,
        "extra": "ignore",
    }


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


# Activation names accepted in spec files
ACTIVATION_NAMES = ("relu", "erf", "tanh", "identity")

# First-layer measure kinds accepted in spec files
PI_KINDS = ("gaussian", "l1sphere", "empirical")

# Expectation methods accepted in spec files
METHOD_NAMES = ("analytic", "quadrature", "montecarlo")

# Process exit codes of the command-line interface
EXIT_CODES = {
    "ok": 0,
    "parse": 2,
    "numeric": 3,
    "integrity": 4,
    "fail": 5,
}

# Statistical bands used by the verification commands
ACCEPTANCE_BANDS = {
    "zscore": 5.0,
    "cross_corr_sigmas": 4.0,
    "skew_sigmas": 5.0,
    "kurtosis_slack": 0.1,
    "variance_ratio_rel": 0.25,
    "mean_sigmas": 4.0,
    "psd_tol": 1e-8,
    "beta_residual": 1e-8,
}
