import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from roomtrace.neuralnet import (
    LabeledSet,
    NNModel,
    TrainConfig,
    TrainingDiverged,
    evaluate,
    forward,
    gradient,
    init_model,
    load_model,
    loss,
    save_model,
    softmax,
    train,
)


def reference_forward(model, x):
    """Loop-based forward pass, written independently of the library."""
    a = list(x)
    for l, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = [sum(a[i] * W[i, j] for i in range(len(a))) + b[j] for j in range(W.shape[1])]
        if l == len(model.weights) - 1:
            top = max(z)
            e = [math.exp(v - top) for v in z]
            a = [v / sum(e) for v in e]
        else:
            a = [1.0 / (1.0 + math.exp(-v)) for v in z]
    return np.array(a)


def random_problem(seed, sizes=(5, 4, 3), n=7):
    rng = np.random.default_rng(seed)
    model = init_model(list(sizes), seed, scale=1.0)
    for b in model.biases:
        b[:] = rng.uniform(-1, 1, b.shape)
    data = LabeledSet(rng.normal(size=(n, sizes[0])), rng.integers(0, sizes[-1], n))
    return model, data


def test_zero_weights_give_uniform_output():
    model = init_model([6, 5, 10], 0, scale=0.0)
    p = forward(model, np.arange(6.0))
    np.testing.assert_allclose(p, np.full(10, 0.1), rtol=0, atol=1e-15)
    data = LabeledSet(np.ones((3, 6)), [0, 4, 9])
    assert abs(loss(model, data) - math.log(10)) < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_forward_matches_reference(seed):
    model, data = random_problem(seed, (6, 5, 4, 3))
    out = forward(model, data.inputs)
    for x, p in zip(data.inputs, out):
        np.testing.assert_allclose(p, reference_forward(model, x), rtol=0, atol=1e-12)
    # a single vector gives a single distribution
    assert forward(model, data.inputs[0]).shape == (3,)


def finite_difference(model, data, h=1e-5):
    gW, gb = [], []
    for params, grads in ((model.weights, gW), (model.biases, gb)):
        for P in params:
            G = np.zeros_like(P)
            for idx in np.ndindex(P.shape):
                old = P[idx]
                P[idx] = old + h
                up = loss(model, data)
                P[idx] = old - h
                down = loss(model, data)
                P[idx] = old
                G[idx] = (up - down) / (2 * h)
            grads.append(G)
    return gW, gb


def max_rel_error(a, b):
    return max(np.max(np.abs(x - y) / np.maximum(1e-8, np.abs(x) + np.abs(y))) for x, y in zip(a, b))


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_finite_differences(seed):
    model, data = random_problem(seed, (4, 5, 3) if seed % 2 else (3, 4, 4, 3))
    gW, gb = gradient(model, data)
    nW, nb = finite_difference(model, data)
    assert max_rel_error(gW, nW) < 1e-4
    assert max_rel_error(gb, nb) < 1e-4


def test_duplicated_data_leaves_loss_and_gradient_unchanged():
    model, data = random_problem(3)
    double = LabeledSet(np.vstack([data.inputs, data.inputs]), np.concatenate([data.targets, data.targets]))
    assert loss(model, double) == pytest.approx(loss(model, data), abs=1e-12)
    for a, b in zip(gradient(model, data)[0], gradient(model, double)[0]):
        np.testing.assert_allclose(a, b, atol=1e-12)


@settings(max_examples=80, deadline=None)
@given(arrays(float, st.integers(1, 12), elements=st.floats(-50, 50)), st.floats(-100, 100))
def test_softmax_is_shift_invariant_distribution(z, c):
    p = softmax(z)
    assert abs(p.sum() - 1) < 1e-12 and np.all(p >= 0)
    np.testing.assert_allclose(softmax(z + c), p, atol=1e-12)


def test_learns_separable_toy_set():
    rng = np.random.default_rng(0)
    centers = np.array([[3.0, 0.0], [-3.0, 0.0], [0.0, 3.0]])
    y = rng.integers(0, 3, 150)
    X = centers[y] + rng.normal(scale=0.5, size=(150, 2))
    data = LabeledSet(X, y)
    model = train(data, TrainConfig(learning_rate=1e-3, iterations=500, hidden=8))
    assert evaluate(model, data) > 0.97
    hist = model.meta["loss_history"]
    assert hist[-1][0] == 500 and hist[-1][1] < hist[0][1]
    mean = train(data, TrainConfig(learning_rate=0.15, iterations=500, hidden=8, reduction="mean"))
    assert evaluate(mean, data) > 0.97


def test_zero_iterations_returns_initial_model():
    _, data = random_problem(1)
    model = train(data, TrainConfig(iterations=0, hidden=4, seed=9))
    init = init_model([5, 4, 3], 9)
    for a, b in zip(model.weights, init.weights):
        assert np.array_equal(a, b)
    assert len(model.meta["loss_history"]) == 1


def test_training_is_deterministic():
    _, data = random_problem(2)
    cfg = TrainConfig(learning_rate=1e-2, iterations=50, hidden=4, seed=5)
    a, b = train(data, cfg), train(data, cfg)
    for x, y in zip(a.weights + a.biases, b.weights + b.biases):
        assert np.array_equal(x, y)


def test_divergence_is_reported():
    data = LabeledSet(np.array([[1e6, -1e6], [-1e6, 1e6]]), [0, 1])
    with pytest.raises(TrainingDiverged), np.errstate(all="ignore"):
        train(data, TrainConfig(learning_rate=1e308, iterations=5, hidden=0))


def test_save_load_roundtrip(tmp_path):
    model, data = random_problem(4)
    model.meta["features"] = "raw"
    path = tmp_path / "m.json"
    save_model(model, path)
    back = load_model(path)
    assert back.layer_sizes == model.layer_sizes and back.meta["features"] == "raw"
    assert np.array_equal(forward(back, data.inputs), forward(model, data.inputs))


def test_load_rejects_bad_files(tmp_path):
    p = tmp_path / "m.json"
    p.write_text('{"format": "other"}')
    with pytest.raises(ValueError, match="not a roomtrace-nn"):
        load_model(p)
    p.write_text('{"format": "roomtrace-nn", "version": 1, "layer_sizes": [2, 3], "weights": [[1, 2]], "biases": [[0, 0, 0]]}')
    with pytest.raises(ValueError, match="do not chain"):
        load_model(p)


def test_model_validates_shapes():
    with pytest.raises(ValueError, match="expected W"):
        NNModel([2, 3], [np.zeros((3, 2))], [np.zeros(3)])
    with pytest.raises(ValueError, match="input width"):
        forward(init_model([2, 3]), np.zeros(4))
