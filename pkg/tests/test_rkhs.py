import numpy as np
import pytest

from nngp.data import Dataset
from nngp.exceptions import DimensionMismatchError
from nngp.kernel import GaussianIID, kernel_value
from nngp.regression import fit, krr_objective, posterior_mean, rkhs_inner, rkhs_norm_sq


@pytest.fixture
def problems(spec_factory, rng):
    out = []
    for i in range(10):
        spec = spec_factory(["relu", "erf"][i % 2], depth=1 + i % 2, d_in=2,
                            pi=GaussianIID(var_w=1.0, var_b=0.4))
        M = int(rng.integers(3, 10))
        data = Dataset(rng.normal(size=(M, 2)), rng.normal(size=M))
        out.append(fit(spec, data, float(rng.uniform(0.05, 0.5))))
    return out


def test_closed_form_beta_is_stationary(problems):
    for model in problems:
        beta = model.beta
        scale = max(1.0, abs(krr_objective(model, beta)))
        step = 1e-6
        grad = np.array([
            (krr_objective(model, beta + step * e) - krr_objective(model, beta - step * e)) / (2 * step)
            for e in np.eye(beta.shape[0])
        ])
        assert np.linalg.norm(grad) <= 1e-6 * scale


def test_closed_form_beta_beats_perturbations(problems, rng):
    for model in problems:
        best = krr_objective(model, model.beta)
        for _ in range(100):
            delta = rng.normal(size=model.beta.shape)
            delta *= 1e-3 / np.linalg.norm(delta)
            assert krr_objective(model, model.beta + delta) >= best - 1e-12 * max(1.0, best)


@pytest.mark.slow
def test_closed_form_beta_beats_many_perturbations(problems, rng):
    for model in problems:
        best = krr_objective(model, model.beta)
        deltas = rng.normal(size=(1000, model.beta.shape[0]))
        deltas *= 1e-3 / np.linalg.norm(deltas, axis=1, keepdims=True)
        assert min(krr_objective(model, model.beta + d) for d in deltas) >= best - 1e-12 * max(1.0, best)


def test_norm_is_the_inner_product_with_itself(problems):
    for model in problems[:3]:
        X, beta = model.data.X, model.beta
        assert rkhs_norm_sq(model) == pytest.approx(rkhs_inner(X, beta, X, beta, model.spec), rel=1e-10)
        assert rkhs_norm_sq(model) >= 0


def test_inner_product_reproduces_the_posterior_mean(problems):
    # <Delta, k(x, .)> = Delta(x) for the centred posterior mean Delta.
    model = problems[0]
    x = np.array([0.3, -0.7])
    inner = rkhs_inner(model.data.X, model.beta, x[None, :], [1.0], model.spec)
    hx = posterior_mean(model, x) - inner
    assert hx == pytest.approx(kernel_value(model.spec, x, x)[0], abs=1e-12)


def test_inner_product_checks_lengths(problems):
    model = problems[0]
    with pytest.raises(DimensionMismatchError):
        rkhs_inner(model.data.X, [1.0], model.data.X, model.beta, model.spec)
    with pytest.raises(DimensionMismatchError):
        krr_objective(model, np.ones(model.data.n_samples + 1))
