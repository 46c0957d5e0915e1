"""
Two-layer Monte Carlo networks for Barron functions.

A Barron function is f(x) = E_rho[a phi(w^T x + b)] with (w, b) on the unit
l1-sphere. rho is factored as pi(w, b) times a conditional law of a whose mean
is alpha(w, b). The width-N estimator is (1/N) sum_i a_i phi(w_i^T x + b_i).
"""

from dataclasses import dataclass, field, replace
import math
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from joblib import Parallel, delayed
import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..config import ACCEPTANCE_BANDS, get_settings
from ..exceptions import BarronSpecError, ConfigError, DimensionMismatchError
from ..kernel.activation import ActivationKind, apply_activation, parse_activation
from ..kernel.measures import Empirical, FirstLayerMeasure, L1SphereUniform
from ..kernel.spec import nest_sections, parse_flat_config, validation_error
from ..data.dataset import parse_atoms
from ..utils.logger import get_simulation_logger
from ..utils.rng import derive_seed, stream
from .ensemble import Verdict
from .network import NetworkSample, forward

logger = get_simulation_logger()

PathLike = Union[str, Path]
ASampler = Callable[[np.ndarray, np.ndarray, np.random.Generator], np.ndarray]


@dataclass(frozen=True)
class ARule:
    """
    Conditional law of the outer weight a given (w, b).

    The affine form gives alpha(w, b) = offset + w_coef^T w + b_coef b, plus
    optional Gaussian noise of variance ``noise_var``. A rule built from a bare
    ``sampler`` has no known conditional mean.
    """

    offset: float = 0.0
    w_coef: Tuple[float, ...] = ()
    b_coef: float = 0.0
    noise_var: float = 0.0
    sampler: Optional[ASampler] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "w_coef", tuple(float(c) for c in self.w_coef))
        if self.noise_var < 0 or not math.isfinite(self.noise_var):
            raise BarronSpecError(f"a.noise_var must be finite and >= 0, got {self.noise_var}")

    @classmethod
    def constant(cls, a: float) -> "ARule":
        return cls(offset=float(a))

    @classmethod
    def from_sampler(cls, sampler: ASampler) -> "ARule":
        return cls(sampler=sampler)

    @property
    def has_conditional_mean(self) -> bool:
        return self.sampler is None

    @property
    def is_deterministic(self) -> bool:
        return self.sampler is None and self.noise_var == 0.0

    def alpha(self, W: np.ndarray, b: np.ndarray) -> np.ndarray:
        """alpha(w_i, b_i) for each row."""
        if not self.has_conditional_mean:
            raise BarronSpecError("this a-rule only samples a; its conditional mean is unavailable")
        out = np.full(b.shape[0], self.offset)
        if self.w_coef:
            if len(self.w_coef) != W.shape[1]:
                raise BarronSpecError(f"a.w_coef has {len(self.w_coef)} entries, d_in is {W.shape[1]}")
            out = out + W @ np.asarray(self.w_coef)
        if self.b_coef != 0.0:
            out = out + self.b_coef * b
        return out

    def draw(self, W: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.sampler is not None:
            return np.asarray(self.sampler(W, b, rng), dtype=float)
        a = self.alpha(W, b)
        if self.noise_var > 0:
            a = a + math.sqrt(self.noise_var) * rng.standard_normal(a.shape[0])
        return a


@dataclass(frozen=True, eq=False)
class BarronSamplerSpec:
    """A measure rho = pi x (a | w, b) on the l1-sphere and a network width."""

    d_in: int
    activation: ActivationKind
    pi: FirstLayerMeasure
    a_rule: ARule
    n: int = 256
    hpi_samples: Optional[int] = None

    def __post_init__(self):
        if self.d_in < 1:
            raise BarronSpecError(f"d_in must be >= 1, got {self.d_in}")
        if self.n < 1:
            raise BarronSpecError(f"n must be >= 1, got {self.n}")
        if isinstance(self.pi, Empirical):
            if self.pi.d_in != self.d_in:
                raise BarronSpecError(f"atoms have dimension {self.pi.d_in}, d_in is {self.d_in}")
            if not self.pi.on_l1_sphere():
                raise BarronSpecError("every atom (w, b) must have unit l1 norm")
        elif not isinstance(self.pi, L1SphereUniform):
            raise BarronSpecError(f"pi must live on the l1-sphere, got a {self.pi.kind} measure")
        if self.a_rule.w_coef and len(self.a_rule.w_coef) != self.d_in:
            raise BarronSpecError(f"a.w_coef has {len(self.a_rule.w_coef)} entries, d_in is {self.d_in}")

    @property
    def is_point_mass(self) -> bool:
        return isinstance(self.pi, Empirical) and self.pi.probs.shape[0] == 1

    def with_width(self, n: int) -> "BarronSamplerSpec":
        return replace(self, n=int(n))


# --------------------------------------------------------------------------- config files


class _BarronPi(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: str = "l1sphere"
    atoms: Optional[str] = None


class _BarronA(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    offset: float = Field(0.0, allow_inf_nan=False)
    w_coef: Optional[str] = None
    b_coef: float = Field(0.0, allow_inf_nan=False)
    noise_var: float = Field(0.0, ge=0, allow_inf_nan=False)


class BarronConfig(BaseModel):
    """Schema of a Barron sampler file."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    d_in: int = Field(ge=1)
    activation: str = "relu"
    pi: _BarronPi = _BarronPi()
    a: _BarronA = _BarronA()
    n: int = Field(256, ge=1)
    hpi_samples: Optional[int] = Field(None, ge=1)


def parse_barron_spec(text: str, base_dir: Optional[PathLike] = None, name: str = "barron") -> BarronSamplerSpec:
    """
    Parse a Barron sampler file.

    Raises:
        ConfigError: unknown key or malformed value
        BarronSpecError: the sampler is not a valid l1-sphere construction
    """
    conf = parse_flat_config(text, name)
    try:
        model = BarronConfig.model_validate(nest_sections(conf, ("pi", "a")))
    except ValidationError as e:
        raise validation_error(conf, e)
    try:
        activation = parse_activation(model.activation)
    except ConfigError as e:
        raise conf.error(str(e), "activation")

    if model.pi.kind == "l1sphere":
        if model.pi.atoms is not None:
            raise conf.error("only used by the empirical measure", "pi.atoms")
        pi: FirstLayerMeasure = L1SphereUniform()
    elif model.pi.kind == "empirical":
        if model.pi.atoms is None:
            raise conf.error("the empirical measure needs an atoms file", "pi.atoms")
        path = Path(model.pi.atoms)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        try:
            atoms_text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise conf.error(f"cannot read atoms file {path}: {e.strerror or e}", "pi.atoms")
        W, b, p = parse_atoms(atoms_text, model.d_in, str(path))
        try:
            pi = Empirical(W, b, p, source=model.pi.atoms)
        except ConfigError as e:
            raise conf.error(str(e), "pi.atoms")
    else:
        raise conf.error(f"Barron measures are l1sphere or empirical, got '{model.pi.kind}'", "pi.kind")

    w_coef: Tuple[float, ...] = ()
    if model.a.w_coef:
        try:
            w_coef = tuple(float(c) for c in model.a.w_coef.split(","))
        except ValueError:
            raise conf.error(f"expected a comma list of numbers, got '{model.a.w_coef}'", "a.w_coef")
    rule = ARule(model.a.offset, w_coef, model.a.b_coef, model.a.noise_var)
    return BarronSamplerSpec(model.d_in, activation, pi, rule, model.n, model.hpi_samples)


def load_barron_spec(path: PathLike) -> BarronSamplerSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read Barron spec {path}: {e.strerror or e}")
    return parse_barron_spec(text, base_dir=path.parent, name=str(path))


# --------------------------------------------------------------------------- sampling


def build_barron_network(bs: BarronSamplerSpec, seed: int) -> NetworkSample:
    """
    Width-N two-layer network (1/N) sum_i a_i phi(w_i^T x + b_i).

    (w_i, b_i) are drawn from pi and a_i from the a-rule; the output weights are a_i / N.
    """
    rng = stream(seed, "barron", 0)
    W, b = bs.pi.sample(bs.n, bs.d_in, rng)
    a = bs.a_rule.draw(W, b, rng)
    return NetworkSample((W, (a / bs.n)[None, :]), (b, np.zeros(1)), bs.activation)


def _check_x(bs: BarronSamplerSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != bs.d_in:
        raise DimensionMismatchError(f"x has {x.shape[0]} coordinates, d_in is {bs.d_in}")
    return x


def direct_barron_integral(bs: BarronSamplerSpec, x, samples: int, seed: int) -> Tuple[float, float]:
    """
    Monte Carlo estimate of f(x) = E_rho[a phi(w^T x + b)] with its stderr.

    Uses alpha in place of a when the rule exposes it; an empirical measure with
    a known alpha is summed exactly.
    """
    x = _check_x(bs, x)
    rule = bs.a_rule
    if isinstance(bs.pi, Empirical) and rule.has_conditional_mean:
        W, b, p = bs.pi.atoms(bs.d_in, seed)
        return float(p @ (rule.alpha(W, b) * apply_activation(bs.activation, W @ x + b))), 0.0
    rng = stream(seed, "barron_oracle", 0)
    W, b = bs.pi.sample(samples, bs.d_in, rng)
    a = rule.alpha(W, b) if rule.has_conditional_mean else rule.draw(W, b, rng)
    values = a * apply_activation(bs.activation, W @ x + b)
    return _mean_stderr(values)


def _mean_stderr(values: np.ndarray) -> Tuple[float, float]:
    if values.shape[0] == 0:
        raise BarronSpecError("need at least one sample")
    if np.all(values == values[0]):
        return float(values[0]), 0.0
    if values.shape[0] == 1:
        return float(values[0]), math.inf
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.shape[0]))


def estimate_hpi_norm_sq(bs: BarronSamplerSpec, samples: Optional[int] = None,
                         seed: int = 0) -> Tuple[float, float]:
    """
    ||f||^2 in H_pi: E_pi[alpha(w, b)^2], with its standard error.

    Raises:
        BarronSpecError: the a-rule exposes no conditional mean
    """
    if not bs.a_rule.has_conditional_mean:
        raise BarronSpecError("the H_pi norm needs alpha(w, b); this a-rule only samples a")
    if isinstance(bs.pi, Empirical):
        W, b, p = bs.pi.atoms(bs.d_in, seed)
        return float(p @ bs.a_rule.alpha(W, b) ** 2), 0.0
    samples = samples or bs.hpi_samples or get_settings().measure_samples
    W, b = bs.pi.sample(samples, bs.d_in, stream(seed, "hpi", 0))
    return _mean_stderr(bs.a_rule.alpha(W, b) ** 2)


# --------------------------------------------------------------------------- 1/N variance law


@dataclass(eq=False)
class BarronVarianceReport:
    """Per-N estimator statistics and consecutive variance ratios."""

    x: np.ndarray
    reps: int
    oracle: Tuple[float, float]
    per_n: pd.DataFrame
    ratios: pd.DataFrame
    notices: List[str] = field(default_factory=list)

    def evaluate(self, bands: Optional[Dict[str, float]] = None) -> Verdict:
        """Variance ratios within the band around N_{i+1}/N_i and estimator means near the direct integral."""
        bands = {**ACCEPTANCE_BANDS, **(bands or {})}
        verdict = Verdict(True, notices=list(self.notices))
        for row in self.ratios.itertuples(index=False):
            label = f"Var[f_{row.n_from}]/Var[f_{row.n_to}]"
            if not math.isfinite(row.ratio):
                verdict.notices.append(f"{label}: undefined, ratio check skipped")
                continue
            verdict.checks.append(
                f"{label}: {row.ratio:.4g} (expected {row.expected:g}, band [{row.band_low:.4g}, {row.band_high:.4g}], "
                f"bootstrap [{row.ci_low:.4g}, {row.ci_high:.4g}]) {'ok' if row.in_band else 'FAIL'}"
            )
            verdict.passed &= bool(row.in_band)
        for row in self.per_n.itertuples(index=False):
            if not math.isfinite(row.mean_z):
                verdict.notices.append(f"mean at N={row.n}: z-score undefined, check skipped")
                continue
            ok = abs(row.mean_z) <= bands["mean_sigmas"]
            verdict.checks.append(f"mean at N={row.n}: z = {row.mean_z:.3g} {'ok' if ok else 'FAIL'}")
            verdict.passed &= bool(ok)
        return verdict

    def format_table(self) -> str:
        fmt = lambda v: f"{v:.6g}"
        return self.per_n.to_string(index=False, float_format=fmt) + "\n\n" + self.ratios.to_string(index=False, float_format=fmt)


def _barron_value(bs: BarronSamplerSpec, x: np.ndarray, seed: int, i: int, r: int) -> float:
    return float(forward(build_barron_network(bs, derive_seed(seed, "barron", i, r)), x)[0])


def _bootstrap_ratio(a: np.ndarray, b: np.ndarray, n_boot: int, rng: np.random.Generator) -> Tuple[float, float]:
    ia = rng.integers(0, a.shape[0], size=(n_boot, a.shape[0]))
    ib = rng.integers(0, b.shape[0], size=(n_boot, b.shape[0]))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = a[ia].var(axis=1, ddof=1) / b[ib].var(axis=1, ddof=1)
    ratios = ratios[np.isfinite(ratios)]
    if ratios.size == 0:
        return math.nan, math.nan
    low, high = np.percentile(ratios, [2.5, 97.5])
    return float(low), float(high)


def barron_variance_scaling(bs_template: BarronSamplerSpec, x, n_list: Sequence[int], reps: int, seed: int,
                            n_boot: Optional[int] = None, oracle_samples: Optional[int] = None,
                            n_jobs: Optional[int] = None) -> BarronVarianceReport:
    """
    Variance of f_N(x) across independent builds for each N, and its ratios.

    For consecutive widths N_i < N_{i+1} the ratio Var[f_{N_i}] / Var[f_{N_{i+1}}]
    is expected to be N_{i+1} / N_i; a percentile bootstrap gives its interval.

    Args:
        bs_template: Sampler; its ``n`` is replaced by each entry of ``n_list``
        x: Evaluation point
        n_list: Widths, increasing, spanning at least a factor of 2
        reps: Builds per width (>= 2)
        seed: Master seed
        n_boot: Bootstrap resamples (default from settings)
        oracle_samples: Draws for the direct integral (default from settings)
        n_jobs: joblib workers
    """
    x = _check_x(bs_template, x)
    ns = [int(n) for n in n_list]
    if len(ns) < 2 or any(b <= a for a, b in zip(ns, ns[1:])) or ns[-1] < 2 * ns[0]:
        raise BarronSpecError(f"n_list must be increasing and span a factor of at least 2, got {ns}")
    if reps < 2:
        raise BarronSpecError(f"need at least 2 repetitions, got {reps}")
    settings = get_settings()
    n_boot = n_boot or settings.bootstrap_resamples
    n_jobs = settings.n_jobs if n_jobs is None else n_jobs

    oracle = direct_barron_integral(bs_template, x, oracle_samples or settings.measure_samples, seed)
    notices: List[str] = []
    samples = []
    rows = []
    for i, n in enumerate(ns):
        bs = bs_template.with_width(n)
        values = np.array(Parallel(n_jobs=n_jobs)(
            delayed(_barron_value)(bs, x, seed, i, r) for r in range(reps)
        ))
        samples.append(values)
        mean = float(values.mean())
        var = 0.0 if np.all(values == values[0]) else float(values.var(ddof=1))
        stderr = math.sqrt(var / reps)
        combined = math.hypot(stderr, oracle[1])
        if combined > 0:
            mean_z = (mean - oracle[0]) / combined
        else:
            mean_z = 0.0 if abs(mean - oracle[0]) <= 1e-12 * max(1.0, abs(oracle[0])) else math.inf
        rows.append({"n": n, "mean": mean, "variance": var, "stderr": stderr, "mean_z": mean_z})
        logger.info(f"N={n}: mean {mean:.6g}, variance {var:.4g} over {reps} builds")

    ratio_rows = []
    for i in range(len(ns) - 1):
        expected = ns[i + 1] / ns[i]
        var_a, var_b = rows[i]["variance"], rows[i + 1]["variance"]
        if var_b == 0.0:
            notices.append(f"variance 0 at N={ns[i + 1]}: ratio check skipped")
            ratio, ci = math.nan, (math.nan, math.nan)
        else:
            ratio = var_a / var_b
            ci = _bootstrap_ratio(samples[i], samples[i + 1], n_boot, stream(seed, "bootstrap", i))
        rel = ACCEPTANCE_BANDS["variance_ratio_rel"]
        low, high = (1.0 - rel) * expected, (1.0 + rel) * expected
        ratio_rows.append({
            "n_from": ns[i], "n_to": ns[i + 1], "ratio": ratio, "expected": expected,
            "ci_low": ci[0], "ci_high": ci[1], "band_low": low, "band_high": high,
            "in_band": bool(math.isfinite(ratio) and low <= ratio <= high),
        })

    per_n = pd.DataFrame(rows)
    per_n["oracle"] = oracle[0]
    per_n["oracle_stderr"] = oracle[1]
    return BarronVarianceReport(x, reps, oracle, per_n, pd.DataFrame(ratio_rows), notices)
