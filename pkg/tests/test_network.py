import numpy as np
import pytest

from nngp.exceptions import ConfigError, DimensionMismatchError
from nngp.kernel import ActivationKind, Empirical, GaussianIID, L1SphereUniform
from nngp.simulation import NetworkSample, forward, sample_l1_sphere, sample_network


def test_forward_on_a_hand_set_network():
    net = NetworkSample.from_arrays(
        weights=[[[1.0, -1.0], [0.5, 2.0]], [[1.0, 3.0]]],
        biases=[[0.0, -1.0]],
        activation=ActivationKind.RELU,
    )
    # Hidden pre-activations at (2, 1): (1, 2); both positive.
    np.testing.assert_allclose(forward(net, [2.0, 1.0]), [1.0 + 3.0 * 2.0])
    # At (0, 1): (-1, 1) so the first unit is clipped.
    np.testing.assert_allclose(forward(net, [0.0, 1.0]), [3.0])
    batch = forward(net, np.array([[2.0, 1.0], [0.0, 1.0]]))
    assert batch.shape == (2, 1)
    np.testing.assert_allclose(batch[:, 0], [7.0, 3.0])
    assert net.widths == (2,)
    assert (net.d_in, net.d_out, net.depth) == (2, 1, 1)


def test_two_hidden_layer_identity_network_is_affine():
    W1, W2, W3 = np.array([[2.0]]), np.array([[1.0], [-1.0]]), np.array([[0.5, 0.25]])
    net = NetworkSample.from_arrays([W1, W2, W3], [[1.0], [0.0, 2.0]], ActivationKind.IDENTITY)
    x = 3.0
    hidden = W2 @ (W1 @ [x] + 1.0) + np.array([0.0, 2.0])
    np.testing.assert_allclose(forward(net, [x]), W3 @ hidden)


def test_network_shapes_are_validated():
    with pytest.raises(DimensionMismatchError):
        NetworkSample.from_arrays([[[1.0]], [[1.0, 1.0]]], [[0.0]], ActivationKind.RELU)
    with pytest.raises(DimensionMismatchError):
        NetworkSample.from_arrays([[[1.0]], [[1.0]]], [[0.0], [1.0]], ActivationKind.RELU)
    with pytest.raises(DimensionMismatchError):
        NetworkSample.from_arrays([[[1.0]]], [], ActivationKind.RELU)
    net = NetworkSample.from_arrays([[[1.0]], [[1.0]]], [[0.0]], ActivationKind.RELU)
    with pytest.raises(DimensionMismatchError):
        forward(net, [1.0, 2.0])


def test_sampled_network_shapes_and_determinism(spec_factory):
    spec = spec_factory("tanh", depth=2, d_in=3)
    net = sample_network(spec, [5, 7], d_out=2, seed=11)
    assert [W.shape for W in net.weights] == [(5, 3), (7, 5), (2, 7)]
    np.testing.assert_array_equal(net.biases[-1], 0.0)
    again = sample_network(spec, [5, 7], d_out=2, seed=11)
    for a, b in zip(net.weights, again.weights):
        np.testing.assert_array_equal(a, b)
    other = sample_network(spec, [5, 7], d_out=2, seed=12)
    assert not np.array_equal(net.weights[0], other.weights[0])


def test_deeper_layers_scale_with_fan_in(spec_factory):
    spec = spec_factory("relu", depth=1, d_in=1, pi=GaussianIID(var_w=1.0), output={"var_w": 4.0, "mu_w": 2.0})
    net = sample_network(spec, [20_000], d_out=1, seed=0)
    W2 = net.weights[1]
    assert W2.mean() == pytest.approx(2.0 / 20_000, abs=5e-4)
    assert W2.var() * 20_000 == pytest.approx(4.0, rel=0.05)


def test_widths_are_checked(spec_factory):
    spec = spec_factory("relu", depth=2)
    with pytest.raises(ConfigError):
        sample_network(spec, [4], d_out=1, seed=0)
    with pytest.raises(ConfigError):
        sample_network(spec, [4, 0], d_out=1, seed=0)
    with pytest.raises(ConfigError):
        sample_network(spec, [4, 4], d_out=0, seed=0)


def test_first_layer_follows_the_measure(spec_factory):
    spec = spec_factory("relu", depth=1, d_in=2, pi=L1SphereUniform())
    net = sample_network(spec, [50], d_out=1, seed=4)
    norms = np.abs(net.weights[0]).sum(axis=1) + np.abs(net.biases[0])
    np.testing.assert_allclose(norms, 1.0, atol=1e-12)

    pi = Empirical(np.array([[0.5, 0.25]]), np.array([0.25]), np.array([1.0]))
    net = sample_network(spec_factory("relu", depth=1, d_in=2, pi=pi), [3], d_out=1, seed=4)
    np.testing.assert_array_equal(net.weights[0], [[0.5, 0.25]] * 3)


def test_single_l1_sphere_point():
    w, b = sample_l1_sphere(3, seed=8)
    assert w.shape == (3,)
    assert np.abs(w).sum() + abs(b) == pytest.approx(1.0)
    w2, b2 = sample_l1_sphere(3, seed=8)
    np.testing.assert_array_equal(w, w2)
    assert b == b2


def test_l1_sphere_signs_are_fair():
    draws = [sample_l1_sphere(3, seed=s) for s in range(2000)]
    signs = np.array([np.append(w, b) > 0 for w, b in draws])
    norms = np.array([np.abs(w).sum() + abs(b) for w, b in draws])
    np.testing.assert_allclose(norms, 1.0, rtol=1e-12)
    # 8000 coordinates; 4 sigma of a fair coin is about 0.022
    assert abs(signs.mean() - 0.5) < 0.025
    assert np.all(np.abs(signs.mean(axis=0) - 0.5) < 0.05)
