import math

import numpy as np
import pytest

from nngp.exceptions import ConfigError
from nngp.data import Dataset
from nngp.kernel import ExpectationMethod, GaussianIID, gram
from nngp.regression import OptimizerConfig, fit, model_log_marginal_likelihood, optimize_hyperparams


@pytest.fixture
def template(spec_factory):
    return spec_factory(
        "relu", depth=1, d_in=1,
        pi=GaussianIID(var_w=1.0, var_b=0.5),
        output={"var_w": 0.3},
        method=ExpectationMethod.analytic(),
    )


def search(**kwargs):
    kwargs.setdefault("restarts", 2)
    kwargs.setdefault("max_evals", 60)
    kwargs.setdefault("seed", 3)
    return OptimizerConfig(**kwargs)


def test_optimization_never_loses_likelihood(template, sin_data):
    result = optimize_hyperparams(template, sin_data, search(free=("layer2.var_w", "noise"), noise_var=0.5))
    assert result.lml >= result.initial_lml
    assert result.lml > result.initial_lml + 1e-6
    refit = fit(result.spec, sin_data, result.noise_var)
    assert model_log_marginal_likelihood(refit) == pytest.approx(result.lml, rel=1e-10)
    assert result.noise_var > 0
    assert result.spec.output_layer.var_w > 0


def test_trace_records_every_evaluation(template, sin_data):
    result = optimize_hyperparams(template, sin_data, search(free=("layer2.var_w",), noise_var=0.1))
    frame = result.trace_frame()
    assert len(frame) == len(result.trace)
    assert set(frame["restart"]) == {0, 1}
    assert list(frame.columns) == ["restart", "evaluation", "layer2.var_w", "lml", "best_lml"]
    assert frame["best_lml"].is_monotonic_increasing
    assert frame["best_lml"].iloc[-1] == result.lml
    assert frame["layer2.var_w"].iloc[0] == pytest.approx(0.3)


def test_no_free_parameters_is_a_single_evaluation(template, sin_data):
    result = optimize_hyperparams(template, sin_data, search(free=(), noise_var=0.2))
    assert len(result.trace) == 1
    assert result.spec is template
    assert result.noise_var == 0.2
    assert result.lml == pytest.approx(model_log_marginal_likelihood(fit(template, sin_data, 0.2)))


def test_unknown_parameter_is_rejected(template, sin_data):
    with pytest.raises(ConfigError) as exc:
        optimize_hyperparams(template, sin_data, search(free=("layer2.var_b",)))
    assert exc.value.key == "optimize"


def test_search_is_deterministic(template, sin_data):
    cfg = search(free=("pi.var_b", "noise"), noise_var=0.3)
    a = optimize_hyperparams(template, sin_data, cfg)
    b = optimize_hyperparams(template, sin_data, cfg)
    assert a.lml == b.lml
    assert a.noise_var == b.noise_var
    assert [t.params for t in a.trace] == [t.params for t in b.trace]


def test_template_free_list_is_the_default(spec_factory, sin_data):
    spec = spec_factory(
        "erf", depth=1, d_in=1,
        pi=GaussianIID(var_w=2.0, var_b=0.2),
        method=ExpectationMethod.analytic(),
        free=("pi.var_w",),
    )
    result = optimize_hyperparams(spec, sin_data)
    assert set(result.trace[0].params) == {"pi.var_w"}
    assert math.isfinite(result.lml)


def test_noise_level_is_recovered(template, rng):
    true_noise = 0.1
    X = np.linspace(-3.0, 3.0, 64)[:, None]
    h, K = gram(template, X)
    Y = rng.multivariate_normal(h, K + true_noise * np.eye(64), size=3).T
    result = optimize_hyperparams(template, Dataset(X, Y), search(free=("noise",), noise_var=1.0))
    assert true_noise / 2 <= result.noise_var <= 2 * true_noise
