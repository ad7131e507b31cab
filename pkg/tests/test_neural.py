"""Dense-network core: forward examples, gradient oracle, training, serialization."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsd import neural
from gsd.errors import ConfigError, NumericalError


def single_layer(w, b, activation, slope=0.0):
    return neural.DenseNetwork([neural.Layer(np.array(w, dtype=float), np.array(b, dtype=float), activation, slope)])


def test_identity_layer_passes_input_through():
    net = single_layer(np.eye(3), np.zeros(3), "identity")
    x = np.array([1.5, -2.0, 0.25])
    assert np.array_equal(neural.forward(net, x), x)


def test_relu_layer_hand_computed():
    # relu(2 * (-3) + 1) = relu(-5) = 0
    net = single_layer([[2.0]], [1.0], "relu")
    assert neural.forward(net, np.array([-3.0]))[0] == 0.0


def test_leaky_relu_definition():
    net = single_layer([[1.0]], [0.0], "leaky_relu", slope=0.01)
    assert neural.forward(net, np.array([-1.0]))[0] == pytest.approx(-0.01)


def test_forward_dimension_mismatch():
    net = single_layer([[1.0, 2.0]], [0.0], "identity")
    with pytest.raises(ConfigError):
        neural.forward(net, np.array([1.0]))


def test_bce_examples():
    assert neural.bce_with_logit(0.0, 1) == pytest.approx(math.log(2))
    assert neural.bce_with_logit(0.0, 0) == pytest.approx(math.log(2))
    # softplus(20) - 20 = log1p(exp(-20))
    assert neural.bce_with_logit(20.0, 1) == pytest.approx(math.log1p(math.exp(-20.0)), rel=1e-12)
    assert neural.bce_with_logit(20.0, 1) == pytest.approx(2.061e-9, rel=1e-3)


@given(st.floats(min_value=-1e4, max_value=1e4), st.integers(min_value=0, max_value=1))
def test_bce_nonnegative_and_finite(logit, label):
    loss = neural.bce_with_logit(logit, label)
    assert loss >= 0.0 and np.isfinite(loss)


def test_backward_zero_upstream_gives_zero_grads():
    rng = np.random.default_rng(0)
    net = neural.new_dense_network((4, 5, 1), ["leaky_relu", "identity"], rng)
    grads, dx = neural.backward(net, rng.normal(size=4), np.zeros(1))
    assert all(np.all(dw == 0) and np.all(db == 0) for dw, db in grads)
    assert np.all(dx == 0)


def test_backward_linear_layer_is_outer_product():
    net = single_layer([[0.5, -1.0, 2.0]], [0.1], "identity")
    x = np.array([1.0, 2.0, 3.0])
    grads, _ = neural.backward(net, x, np.array([1.0]))
    dw, db = grads[0]
    assert np.allclose(dw, x[None, :])
    assert np.allclose(db, [1.0])


def finite_difference_check(net, x, label, h=1e-5, sample=None, rng=None):
    """Central-difference oracle for d(BCE)/d(theta); returns max relative error."""

    def loss():
        out, _ = neural.forward_batch(net, x[None, :])
        return float(neural.bce_with_logit_batch(out[:, 0], np.array([label]))[0])

    out, cache = neural.forward_batch(net, x[None, :])
    dlogit = neural.sigmoid(out[:, 0]) - label
    grads, _ = neural.backward_batch(net, cache, dlogit[:, None])
    params = net.param_arrays()
    analytic = []
    for dw, db in grads:
        analytic.append(dw)
        analytic.append(db)
    worst = 0.0
    for p, g in zip(params, analytic):
        flat_p = p.ravel()
        flat_g = g.ravel()
        if sample is None:
            coords = range(flat_p.size)
        else:
            coords = rng.choice(flat_p.size, size=min(sample, flat_p.size), replace=False)
        for i in coords:
            orig = flat_p[i]
            flat_p[i] = orig + h
            up = loss()
            flat_p[i] = orig - h
            down = loss()
            flat_p[i] = orig
            fd = (up - down) / (2 * h)
            err = abs(fd - flat_g[i]) / max(abs(fd) + abs(flat_g[i]), 1e-8)
            worst = max(worst, err)
    return worst


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    net = neural.new_dense_network((4, 8, 1), ["leaky_relu", "identity"], rng)
    x = rng.normal(size=4)
    assert finite_difference_check(net, x, label=1) < 1e-4


def test_gradients_match_on_detector_layer_shapes():
    # every layer shape the pair detector uses, sampled coordinates
    rng = np.random.default_rng(4)
    net = neural.new_dense_network((15, 512, 512, 512, 1), ["leaky_relu"] * 3 + ["identity"], rng)
    x = rng.normal(size=15)
    assert finite_difference_check(net, x, label=0, sample=8, rng=rng) < 1e-4


def test_train_separates_linear_toy_data():
    rng = np.random.default_rng(9)
    n = 400
    X = rng.normal(size=(n, 2))
    y = (X @ np.array([1.5, -2.0]) > 0).astype(float)
    Xv = rng.normal(size=(200, 2))
    yv = (Xv @ np.array([1.5, -2.0]) > 0).astype(float)
    net = neural.new_dense_network((2, 16, 1), ["leaky_relu", "identity"], rng)
    cfg = neural.TrainConfig(learning_rate=1e-2, batch_size=32, max_epochs=50, early_stop_patience=50, seed=0)
    trained, history = neural.train(net, (X, y), (Xv, yv), cfg)
    out, _ = neural.forward_batch(trained, Xv)
    accuracy = np.mean((out[:, 0] > 0) == (yv > 0.5))
    assert accuracy >= 0.99
    assert len(history) >= 1


def test_train_zero_epochs_returns_initial_net():
    rng = np.random.default_rng(1)
    net = neural.new_dense_network((2, 4, 1), ["relu", "identity"], rng)
    cfg = neural.TrainConfig(max_epochs=0, early_stop_patience=1, seed=0)
    data = (rng.normal(size=(8, 2)), np.array([0, 1] * 4, dtype=float))
    trained, history = neural.train(net, data, data, cfg)
    assert history == []
    for a, b in zip(net.param_arrays(), trained.param_arrays()):
        assert np.array_equal(a, b)


def test_train_same_seed_identical_weights():
    rng_data = np.random.default_rng(2)
    X = rng_data.normal(size=(64, 3))
    y = (X[:, 0] > 0).astype(float)
    cfg = neural.TrainConfig(max_epochs=5, early_stop_patience=5, seed=21)
    results = []
    for _ in range(2):
        net = neural.new_dense_network((3, 8, 1), ["relu", "identity"], np.random.default_rng(17))
        trained, _ = neural.train(net, (X, y), (X, y), cfg)
        results.append(trained.param_arrays())
    for a, b in zip(*results):
        assert np.array_equal(a, b)


def test_train_aborts_on_nan():
    net = single_layer([[1.0]], [0.0], "identity")
    X = np.array([[np.inf]])
    with pytest.raises(NumericalError):
        neural.train(net, (X, np.array([1.0])), (X, np.array([1.0])),
                     neural.TrainConfig(max_epochs=2, early_stop_patience=1, seed=0))


@settings(deadline=None, max_examples=30)
@given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=3, max_size=3))
def test_forward_finite_for_finite_inputs(values):
    rng = np.random.default_rng(8)
    net = neural.new_dense_network((3, 6, 1), ["leaky_relu", "identity"], rng)
    out = neural.forward(net, np.array(values))
    assert np.all(np.isfinite(out))


def test_serialization_roundtrip_bit_identical(tmp_path):
    rng = np.random.default_rng(12)
    net = neural.new_dense_network((5, 7, 1), ["leaky_relu", "identity"], rng)
    path = tmp_path / "net.json"
    neural.save_model_file(path, "dense", {"net": neural.network_to_dict(net)})
    loaded = neural.network_from_dict(neural.load_model_file(path, "dense")["net"])
    for a, b in zip(net.param_arrays(), loaded.param_arrays()):
        assert np.array_equal(a, b)
    x = rng.normal(size=5)
    assert np.array_equal(neural.forward(net, x), neural.forward(loaded, x))


def test_model_file_kind_checked(tmp_path):
    path = tmp_path / "m.json"
    neural.save_model_file(path, "dense", {})
    with pytest.raises(ConfigError):
        neural.load_model_file(path, "other")


def test_train_config_validation():
    with pytest.raises(ConfigError):
        neural.TrainConfig(learning_rate=0.0)
    with pytest.raises(ConfigError):
        neural.TrainConfig(early_stop_patience=0)
    with pytest.raises(ConfigError):
        neural.TrainConfig(max_epochs=5, early_stop_patience=6)
