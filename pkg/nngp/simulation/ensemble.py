"""
Ensembles of sampled finite-width networks and their convergence to the induced GP.
"""

from dataclasses import dataclass, field
import math
from typing import Dict, List, Optional, Sequence

from joblib import Parallel, delayed
import numpy as np
import pandas as pd
from scipy import stats

from ..config import ACCEPTANCE_BANDS, get_settings
from ..exceptions import ConfigError, DimensionMismatchError
from ..kernel.recursion import gram
from ..kernel.spec import KernelSpec
from ..utils.logger import get_simulation_logger
from ..utils.rng import derive_seed
from .network import check_widths, forward, sample_network

logger = get_simulation_logger()

TABLE_COLUMNS = ["width", "i", "j", "emp_cov", "kernel", "stderr", "zscore"]


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    """Empirical output moments over independently sampled networks."""

    n_ensembles: int
    probe_points: np.ndarray
    emp_mean: np.ndarray
    emp_cov: np.ndarray
    mean_stderr: np.ndarray
    cov_stderr: np.ndarray
    skewness: np.ndarray
    excess_kurtosis: np.ndarray
    cross_output_corr: float


def _replica(spec: KernelSpec, widths, d_out: int, probes: np.ndarray, seed: int, index: int):
    net = sample_network(spec, widths, d_out, derive_seed(seed, "replica", index))
    out = forward(net, probes)
    second = out[0, 1] if d_out > 1 else math.nan
    return out[:, 0], second


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.asarray(num / den, dtype=float)
    out[(den <= 0) & (num == 0)] = 0.0
    return out


def ensemble_stats(spec: KernelSpec, widths: Sequence[int], d_out: int, probes, n_ensembles: int,
                   seed: int, n_jobs: Optional[int] = None) -> EnsembleStats:
    """
    Output statistics of ``n_ensembles`` independent networks.

    Output coordinate 1 is evaluated at every probe; coordinate 2 at the first
    probe feeds the cross-output correlation. Replica r uses the seed derived
    from (seed, r), and results are reduced in replica order, so the statistics
    do not depend on ``n_jobs``.
    """
    widths = check_widths(widths, spec.depth)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if probes.shape[1] != spec.d_in:
        raise DimensionMismatchError(f"probes have {probes.shape[1]} columns, spec expects d_in = {spec.d_in}")
    if n_ensembles < 2:
        raise ConfigError(f"need at least 2 ensembles, got {n_ensembles}", key="ensembles")
    n_jobs = get_settings().n_jobs if n_jobs is None else n_jobs

    results = Parallel(n_jobs=n_jobs)(
        delayed(_replica)(spec, widths, d_out, probes, seed, r) for r in range(n_ensembles)
    )
    Y = np.vstack([r[0] for r in results])
    second = np.array([r[1] for r in results])
    n = Y.shape[0]

    mean = Y.mean(axis=0)
    C = Y - mean
    prods = C[:, :, None] * C[:, None, :]
    emp_cov = prods.sum(axis=0) / (n - 1)
    emp_cov = 0.5 * (emp_cov + emp_cov.T)
    cov_stderr = prods.std(axis=0, ddof=1) / math.sqrt(n)
    mean_stderr = Y.std(axis=0, ddof=1) / math.sqrt(n)

    with np.errstate(invalid="ignore", divide="ignore"):
        skew = np.atleast_1d(stats.skew(Y, axis=0, bias=False))
        kurt = np.atleast_1d(stats.kurtosis(Y, axis=0, fisher=True, bias=False))

    corr = math.nan
    if d_out > 1 and np.std(Y[:, 0]) > 0 and np.std(second) > 0:
        corr = float(np.corrcoef(Y[:, 0], second)[0, 1])

    return EnsembleStats(n, probes, mean, emp_cov, mean_stderr, cov_stderr, skew, kurt, corr)


@dataclass
class Verdict:
    passed: bool
    checks: List[str] = field(default_factory=list)
    notices: List[str] = field(default_factory=list)

    @property
    def label(self) -> str:
        return "PASS" if self.passed else "FAIL"


@dataclass(eq=False)
class WidthConvergenceReport:
    """Per-width comparison of ensemble statistics with the induced kernel."""

    widths: List[int]
    n_ensembles: int
    h: np.ndarray
    kernel: np.ndarray
    stats: List[EnsembleStats]
    table: pd.DataFrame
    summary: pd.DataFrame

    def evaluate(self, bands: Optional[Dict[str, float]] = None) -> Verdict:
        """
        Check the acceptance bands.

        Uses the largest width for the z-score and Gaussianity bands and the two
        extreme widths for the ordering and kurtosis trend. Checks whose inputs
        are undefined are skipped with a notice.
        """
        bands = {**ACCEPTANCE_BANDS, **(bands or {})}
        verdict = Verdict(True)
        first, last = self.summary.iloc[0], self.summary.iloc[-1]
        n = self.n_ensembles

        def check(name: str, value: float, limit: float, ok: bool):
            if not (math.isfinite(value) and math.isfinite(limit)):
                verdict.notices.append(f"{name}: undefined ({value}), check skipped")
                return
            verdict.checks.append(f"{name}: {value:.4g} (limit {limit:.4g}) {'ok' if ok else 'FAIL'}")
            verdict.passed &= bool(ok)

        z = float(last["max_abs_z"])
        check(f"max |z| cov at width {int(last['width'])}", z, bands["zscore"], z <= bands["zscore"])
        zm = float(last["max_abs_mean_z"])
        check(f"max |z| mean at width {int(last['width'])}", zm, bands["zscore"], zm <= bands["zscore"])

        skew_limit = bands["skew_sigmas"] * math.sqrt(6.0 / n)
        s = float(last["max_abs_skew"])
        check("max |skewness|", s, skew_limit, s <= skew_limit)

        corr_limit = bands["cross_corr_sigmas"] / math.sqrt(n)
        c = abs(float(last["cross_output_corr"]))
        check("|cross-output correlation|", c, corr_limit, c <= corr_limit)

        if len(self.widths) < 2:
            verdict.notices.append("single width: ordering and kurtosis trend checks skipped")
            return verdict

        k_first, k_last = float(first["max_abs_kurtosis"]), float(last["max_abs_kurtosis"])
        check("kurtosis trend", k_last, k_first + bands["kurtosis_slack"], k_last <= k_first + bands["kurtosis_slack"])

        # Noise-level inversions between the extreme widths are tolerated.
        d_first, d_last = float(first["max_abs_dev"]), float(last["max_abs_dev"])
        limit = d_first + bands["zscore"] * float(last["max_cov_stderr"])
        check("extreme-width ordering", d_last, limit, d_last <= limit)
        return verdict

    def format_table(self) -> str:
        return self.summary.to_string(index=False, float_format=lambda v: f"{v:.6g}")


def width_convergence_report(spec: KernelSpec, width_list: Sequence[int], probes, n_ensembles: int,
                             seed: int, d_out: int = 2, n_jobs: Optional[int] = None) -> WidthConvergenceReport:
    """
    Compare ensemble covariances with k_NN for a sequence of widths.

    Every hidden layer is set to the same width. Width i uses the seed derived
    from (seed, i).
    """
    widths = [int(w) for w in width_list]
    if not widths:
        raise ConfigError("need at least one width", key="widths")
    if any(b <= a for a, b in zip(widths, widths[1:])):
        raise ConfigError(f"widths must be increasing, got {widths}", key="widths")
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    h, K = gram(spec, probes)
    iu, ju = np.triu_indices(probes.shape[0])

    rows = []
    summaries = []
    all_stats = []
    for index, width in enumerate(widths):
        logger.info(f"Width {width}: sampling {n_ensembles} networks")
        st = ensemble_stats(spec, [width] * spec.depth, d_out, probes, n_ensembles,
                            derive_seed(seed, "width", index), n_jobs)
        all_stats.append(st)
        dev = st.emp_cov - K
        z = _safe_ratio(dev, st.cov_stderr)
        mean_z = _safe_ratio(st.emp_mean - h, st.mean_stderr)
        for i, j in zip(iu, ju):
            rows.append([width, i, j, st.emp_cov[i, j], K[i, j], st.cov_stderr[i, j], z[i, j]])
        summaries.append({
            "width": width,
            "max_abs_dev": float(np.max(np.abs(dev[iu, ju]))),
            "max_abs_z": float(np.max(np.abs(z[iu, ju]))),
            "max_cov_stderr": float(np.max(st.cov_stderr[iu, ju])),
            "max_abs_mean_z": float(np.max(np.abs(mean_z))),
            "max_abs_skew": float(np.max(np.abs(st.skewness))),
            "max_abs_kurtosis": float(np.max(np.abs(st.excess_kurtosis))),
            "cross_output_corr": st.cross_output_corr,
        })
        logger.info(f"Width {width}: max |dev| {summaries[-1]['max_abs_dev']:.4g}, max |z| {summaries[-1]['max_abs_z']:.3g}")

    table = pd.DataFrame(rows, columns=TABLE_COLUMNS).astype({"width": int, "i": int, "j": int})
    return WidthConvergenceReport(widths, n_ensembles, h, K, all_stats, table, pd.DataFrame(summaries))
