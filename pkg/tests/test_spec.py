import math

import numpy as np
import pytest

from nngp.exceptions import ConfigError, DataError
from nngp.kernel import (
    ActivationKind,
    Empirical,
    GaussianIID,
    L1SphereUniform,
    MethodTag,
    dump_kernel_spec,
    load_kernel_spec,
    parse_flat_config,
    parse_kernel_spec,
    sample_l1_sphere_batch,
)
from nngp.kernel.measures import l1_sphere_second_moment

BASIC = """
# comment line
depth = 2
d_in = 3
activation = relu
pi.var_w = 0.5
pi.var_b = 0.1
layer2.var_w = 2.0
layer2.mu_b = 0.2
layer3.var_w = 1.0   # output layer
method = analytic
"""


def test_parse_basic_spec():
    spec = parse_kernel_spec(BASIC)
    assert spec.depth == 2
    assert spec.d_in == 3
    assert spec.activation is ActivationKind.RELU
    assert spec.pi == GaussianIID(var_w=0.5, var_b=0.1)
    assert spec.layer(2).var_w == 2.0
    assert spec.layer(2).mu_b == 0.2
    assert spec.output_layer.var_w == 1.0
    assert spec.method.tag is MethodTag.ANALYTIC
    assert spec.bias_moments(1) == (0.0, 0.1)
    assert spec.bias_moments(2) == (0.2, 0.0)


def test_unknown_key_names_key_and_line():
    with pytest.raises(ConfigError) as exc:
        parse_kernel_spec(BASIC + "layer2.var_x = 1\n")
    assert exc.value.key == "layer2.var_x"
    assert exc.value.line == BASIC.count("\n") + 1
    assert "unknown key" in str(exc.value)


def test_duplicate_key_is_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_flat_config("a = 1\nb = 2\na = 3\n")
    assert exc.value.key == "a"
    assert exc.value.line == 3


def test_line_without_equals_is_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_flat_config("a = 1\nnonsense\n")
    assert exc.value.line == 2


def test_output_layer_bias_is_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_kernel_spec(BASIC + "layer3.var_b = 0.5\n")
    assert exc.value.key == "layer3.var_b"


def test_missing_layer_is_rejected():
    text = "depth = 2\nd_in = 1\nactivation = tanh\nlayer3.var_w = 1\n"
    with pytest.raises(ConfigError) as exc:
        parse_kernel_spec(text)
    assert exc.value.key == "layer2.var_w"


def test_negative_variance_is_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_kernel_spec(BASIC.replace("pi.var_w = 0.5", "pi.var_w = -0.5"))
    assert exc.value.key == "pi.var_w"


def test_gaussian_keys_on_l1_sphere_are_rejected():
    text = "depth = 1\nd_in = 1\nactivation = relu\npi.kind = l1sphere\npi.var_w = 1\nlayer2.var_w = 1\n"
    with pytest.raises(ConfigError) as exc:
        parse_kernel_spec(text)
    assert exc.value.key == "pi.var_w"


def test_empirical_atoms_resolve_relative_to_spec(tmp_path):
    (tmp_path / "atoms.csv").write_text("w0,w1,b,weight\n0.5,0.25,0.25,0.5\n-0.2,0.3,-0.5,0.5\n")
    path = tmp_path / "emp.spec"
    path.write_text("depth = 1\nd_in = 2\nactivation = relu\npi.kind = empirical\npi.atoms = atoms.csv\nlayer2.var_w = 1\n")
    spec = load_kernel_spec(path)
    assert isinstance(spec.pi, Empirical)
    assert spec.pi.on_l1_sphere()
    np.testing.assert_array_equal(spec.pi.probs, [0.5, 0.5])


def test_empirical_atoms_with_wrong_dimension(tmp_path):
    (tmp_path / "atoms.csv").write_text("w0,b,weight\n0.5,0.5,1\n")
    path = tmp_path / "emp.spec"
    path.write_text("depth = 1\nd_in = 2\nactivation = relu\npi.kind = empirical\npi.atoms = atoms.csv\nlayer2.var_w = 1\n")
    with pytest.raises((ConfigError, DataError)) as exc:
        load_kernel_spec(path)
    assert exc.value.exit_code == 2


def test_dump_and_parse_preserve_the_spec():
    spec = parse_kernel_spec(BASIC + "optimize = layer2.var_w,noise\n")
    again = parse_kernel_spec(dump_kernel_spec(spec))
    assert again.pi == spec.pi
    assert again.layers == spec.layers
    assert again.method == spec.method
    assert again.free == ("layer2.var_w", "noise")
    assert dump_kernel_spec(again) == dump_kernel_spec(spec)


def test_param_names_and_with_params():
    spec = parse_kernel_spec(BASIC)
    names = spec.param_names()
    assert "pi.var_w" in names and "layer2.var_b" in names
    assert "layer3.var_w" in names and "layer3.var_b" not in names

    tuned = spec.with_params({"layer2.var_w": 3.0, "pi.mu_w": 0.1})
    assert tuned.get_param("layer2.var_w") == 3.0
    assert tuned.get_param("pi.mu_w") == 0.1
    assert spec.get_param("layer2.var_w") == 2.0


def test_unknown_free_parameter_is_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_kernel_spec(BASIC + "optimize = layer7.var_w\n")
    assert exc.value.key == "optimize"


def test_l1_sphere_samples_lie_on_the_sphere(rng):
    W, b = sample_l1_sphere_batch(3, 2000, rng)
    norms = np.abs(W).sum(axis=1) + np.abs(b)
    np.testing.assert_allclose(norms, 1.0, atol=1e-12)
    # Each coordinate has second moment 2 / (D (D + 1)) with D = 4.
    second = np.mean(b ** 2)
    assert second == pytest.approx(l1_sphere_second_moment(3), abs=5 * np.std(b ** 2) / math.sqrt(2000))


def test_l1_sphere_bias_moments():
    assert L1SphereUniform().bias_moments(1) == (0.0, pytest.approx(1.0 / 3.0))


def test_empirical_probabilities_must_sum_to_one():
    with pytest.raises(ConfigError):
        Empirical(np.array([[0.5], [0.5]]), np.array([0.5, -0.5]), np.array([0.5, 0.6]))


def test_empirical_moments_are_exact():
    pi = Empirical(np.array([[1.0, 0.0], [0.0, 2.0]]), np.array([1.0, -1.0]), np.array([0.25, 0.75]))
    h1, h2, k11, k22, k12 = pi.pre_activation_moments(np.array([1.0, 1.0]), np.array([2.0, 0.0]))
    # w^T x takes 1 w.p. 1/4 and 2 w.p. 3/4; w^T x2 takes 2 and 0.
    assert h1 == pytest.approx(1.75)
    assert h2 == pytest.approx(0.5)
    assert k11 == pytest.approx(0.25 * 1 + 0.75 * 4 - 1.75 ** 2)
    assert k22 == pytest.approx(0.25 * 4 - 0.25)
    assert k12 == pytest.approx(0.25 * 2 - 1.75 * 0.5)
    assert pi.bias_moments(2) == (pytest.approx(-0.5), pytest.approx(0.75))
    assert not pi.on_l1_sphere()
