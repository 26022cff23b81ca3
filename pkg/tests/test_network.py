"""Network forward/backward tests against loop-form and finite-difference oracles."""

import numpy as np
import pytest

from oracles import finite_difference_check, loop_forward, sample_components

from fvmnet.errors import DomainError
from fvmnet.network import (
    CASES,
    Network,
    NetworkSpec,
    backward_batch,
    forward,
    forward_batch,
    init_network,
    mse_loss,
    param_count,
    predict,
)

# Frozen trainable counts for the benchmark ladder.
EXPECTED_COUNTS = {
    "a": 2049,
    "b": 6209,
    "c": 10369,
    "d": 14529,
    "e": 10369,
    "f": 37121,
    "g": 139777,
    "h": 4609,
}


def test_param_counts_for_all_cases():
    for case, expected in EXPECTED_COUNTS.items():
        spec = CASES[case]
        assert param_count(spec) == expected, case
        assert init_network(spec, seed=0).n_params() == expected, case


def test_param_count_single_linear_layer():
    assert param_count(NetworkSpec(30, (), 1)) == 31
    assert param_count(NetworkSpec(4, (3,), 2)) == 4 * 3 + 3 + 3 * 2 + 2


def test_spec_validation():
    with pytest.raises(DomainError):
        NetworkSpec(0, (4,))
    with pytest.raises(DomainError):
        NetworkSpec(4, (0,))
    with pytest.raises(DomainError):
        NetworkSpec(4, (4,), activation="tanh")


def test_init_bounds_seeding_and_zero_biases():
    spec = CASES["c"]
    net = init_network(spec, seed=11)
    again = init_network(spec, seed=11)
    other = init_network(spec, seed=12)
    for l, (fan_in, _) in enumerate(spec.layer_sizes()):
        bound = np.sqrt(6.0 / fan_in)
        assert float(np.abs(net.weights[l]).max()) <= bound
        assert np.array_equal(net.weights[l], again.weights[l])
        assert not np.array_equal(net.weights[l], other.weights[l])
        assert np.all(net.biases[l] == 0.0)
    # Logistic variant uses the two-sided fan bound.
    sig = init_network(CASES["e"], seed=3)
    fi, fo = CASES["e"].layer_sizes()[0]
    assert float(np.abs(sig.weights[0]).max()) <= np.sqrt(6.0 / (fi + fo))


def test_forward_matches_loop_oracle_across_cases():
    rng = np.random.default_rng(42)
    for case, spec in CASES.items():
        net = init_network(spec, seed=100 + ord(case))
        x = rng.standard_normal(spec.n_inputs)
        assert forward(net, x) == pytest.approx(loop_forward(net, x), rel=1e-12), case


def test_forward_batch_shapes_and_scalar_agreement():
    net = init_network(CASES["b"], seed=5)
    rng = np.random.default_rng(6)
    xs = rng.standard_normal((9, 30))
    out, (pre, post) = forward_batch(net, xs)
    assert out.shape == (9, 1)
    assert len(pre) == 3 and len(post) == 4
    batch = predict(net, xs)
    for row in range(9):
        # Batched and single-row matmuls may round differently in the last bits.
        assert batch[row] == pytest.approx(forward(net, xs[row]), rel=1e-12)
    with pytest.raises(DomainError):
        forward_batch(net, rng.standard_normal((4, 31)))


def test_mse_matches_longhand():
    pred = np.array([1.0, 2.0, 4.0])
    target = np.array([1.5, 2.0, 3.0])
    longhand = ((1.0 - 1.5) ** 2 + 0.0 + 1.0) / 3.0
    assert mse_loss(pred, target) == pytest.approx(longhand, rel=1e-15)
    with pytest.raises(DomainError):
        mse_loss(pred, target[:2])


def test_single_linear_neuron_gradient_closed_form():
    # J = (W x + b - y)^2  =>  dJ/dW_i = 2 (W x + b - y) x_i, dJ/db likewise.
    spec = NetworkSpec(3, (), 1)
    net = init_network(spec, seed=1)
    x = np.array([0.5, -1.0, 2.0])
    y = 0.7
    pred = float(x @ net.weights[0][:, 0] + net.biases[0][0])
    loss, gw, gb = backward_batch(net, x[None, :], np.array([y]))
    assert loss == pytest.approx((pred - y) ** 2, rel=1e-14)
    np.testing.assert_allclose(gw[0][:, 0], 2.0 * (pred - y) * x, rtol=1e-14)
    assert gb[0][0] == pytest.approx(2.0 * (pred - y), rel=1e-14)


def test_backprop_matches_finite_differences_each_case():
    rng = np.random.default_rng(77)
    for case, spec in CASES.items():
        net = init_network(spec, seed=200 + ord(case))
        x = rng.standard_normal(spec.n_inputs)
        y = float(forward(net, x)) + 0.8  # keep the output gradient O(1)
        comps = sample_components(net, rng, 16)
        worst = finite_difference_check(net, x, y, comps)
        assert worst < 1e-5, f"case {case}: worst mismatch {worst:.3e}"


def test_rectifier_kink_uses_zero_subgradient():
    spec = NetworkSpec(2, (3,), 1)
    net = init_network(spec, seed=0)
    net.weights[0][:] = 0.0  # every hidden pre-activation is exactly 0
    x = np.array([1.0, -2.0])
    _, gw, gb = backward_batch(net, x[None, :], np.array([1.0]))
    assert np.all(gw[0] == 0.0)
    assert np.all(gb[0] == 0.0)
    # The output layer still learns its bias.
    assert gb[1][0] != 0.0


def test_sigmoid_is_stable_at_extreme_preactivations():
    spec = NetworkSpec(1, (2,), 1, activation="sigmoid")
    net = init_network(spec, seed=2)
    net.weights[0][:] = np.array([[800.0, -800.0]])
    with np.errstate(over="raise"):
        out, (pre, post) = forward_batch(net, np.array([[1.0]]))
    hidden = post[1][0]
    assert hidden[0] == pytest.approx(1.0)
    assert hidden[1] == pytest.approx(0.0, abs=1e-300)
    assert np.isfinite(out).all()


def test_batch_gradient_is_mean_of_sample_gradients():
    net = init_network(CASES["a"], seed=9)
    rng = np.random.default_rng(10)
    xs = rng.standard_normal((4, 30))
    ys = rng.standard_normal(4)
    _, gw_batch, _ = backward_batch(net, xs, ys)
    per_sample = []
    for k in range(4):
        _, gw, _ = backward_batch(net, xs[k : k + 1], ys[k : k + 1])
        per_sample.append(gw[0])
    np.testing.assert_allclose(gw_batch[0], np.mean(per_sample, axis=0), rtol=1e-12)
