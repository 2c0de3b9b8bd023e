"""Small fully-connected classifier trained with full-batch gradient descent.

Hidden layers use the logistic sigmoid, the output layer a softmax. Weights
are stored input-major, so a layer computes ``z = a @ W + b``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit as sigmoid

log = logging.getLogger(__name__)

MODEL_FORMAT = "roomtrace-nn"
MODEL_VERSION = 1


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class NNModel:
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least an input and an output layer")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("one weight matrix and bias vector per layer transition")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_sizes[l], self.layer_sizes[l + 1])
            if W.shape != want or b.shape != (want[1],):
                raise ValueError(f"layer {l}: expected W{want} and b({want[1]},), got W{W.shape} b{b.shape}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {l}: non-finite parameters")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> NNModel:
        return NNModel(
            list(self.layer_sizes),
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
            self.seed,
            dict(self.meta),
        )


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    iterations: int = 20000
    seed: int = 0
    hidden: int = 64
    init_scale: float = 0.05
    record_every: int = 100
    # "sum" descends the summed cross-entropy (step scales with N), "mean" the average
    reduction: str = "sum"

    def __post_init__(self):
        if self.reduction not in ("sum", "mean"):
            raise ValueError("reduction must be 'sum' or 'mean'")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")


@dataclass
class LabeledSet:
    inputs: np.ndarray  # (N, s1)
    targets: np.ndarray  # (N,) room indices

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.asarray(self.targets, dtype=int)
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets differ in length")

    def __len__(self) -> int:
        return len(self.targets)


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def init_model(layer_sizes, seed: int = 0, scale: float = 0.05) -> NNModel:
    """Uniform(-scale, scale) weights, zero biases."""
    rng = np.random.default_rng(seed)
    weights = [rng.uniform(-scale, scale, size=(a, b)) for a, b in zip(layer_sizes[:-1], layer_sizes[1:])]
    biases = [np.zeros(b) for b in layer_sizes[1:]]
    return NNModel(list(layer_sizes), weights, biases, seed)


def _activations(model: NNModel, X: np.ndarray) -> list[np.ndarray]:
    acts = [X]
    for l, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = acts[-1] @ W + b
        acts.append(softmax(z) if l == len(model.weights) - 1 else sigmoid(z))
    return acts


def _check_inputs(model: NNModel, X: np.ndarray) -> None:
    if X.shape[-1] != model.n_inputs:
        raise ValueError(f"input width {X.shape[-1]} does not match model input {model.n_inputs}")


def forward(model: NNModel, x) -> np.ndarray:
    """Class probabilities for one input vector or a batch of row vectors."""
    x = np.asarray(x, dtype=float)
    _check_inputs(model, x)
    return _activations(model, np.atleast_2d(x))[-1].reshape(x.shape[:-1] + (model.n_outputs,))


def _require_nonempty(data: LabeledSet) -> None:
    if len(data) == 0:
        raise ValueError("empty labeled set")


def loss(model: NNModel, data: LabeledSet) -> float:
    """Mean cross-entropy against one-hot targets."""
    _require_nonempty(data)
    _check_inputs(model, data.inputs)
    p = _activations(model, data.inputs)[-1]
    picked = p[np.arange(len(data)), data.targets]
    return float(-np.mean(np.log(np.maximum(picked, np.finfo(float).tiny))))


def gradient(model: NNModel, data: LabeledSet) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Backpropagated gradient of ``loss`` with respect to weights and biases."""
    _require_nonempty(data)
    _check_inputs(model, data.inputs)
    acts = _activations(model, data.inputs)
    N = len(data)
    delta = acts[-1].copy()
    delta[np.arange(N), data.targets] -= 1.0
    delta /= N
    gW = [None] * len(model.weights)
    gb = [None] * len(model.weights)
    for l in range(len(model.weights) - 1, -1, -1):
        gW[l] = acts[l].T @ delta
        gb[l] = delta.sum(axis=0)
        if l > 0:
            a = acts[l]
            delta = (delta @ model.weights[l].T) * a * (1.0 - a)
    return gW, gb


def train(data: LabeledSet, cfg: TrainConfig, n_outputs: int | None = None) -> NNModel:
    """Full-batch gradient descent from a seeded random start.

    The loss is recorded every ``cfg.record_every`` steps (and after the last
    one) in ``model.meta["loss_history"]`` as ``(step, loss)`` pairs.
    """
    _require_nonempty(data)
    if n_outputs is None:
        n_outputs = int(data.targets.max()) + 1
    sizes = [data.inputs.shape[1], cfg.hidden, n_outputs] if cfg.hidden else [data.inputs.shape[1], n_outputs]
    model = init_model(sizes, cfg.seed, cfg.init_scale)
    history = []
    step_size = cfg.learning_rate * (len(data) if cfg.reduction == "sum" else 1)
    for step in range(cfg.iterations):
        if step % cfg.record_every == 0:
            history.append((step, _checked_loss(model, data, step)))
        gW, gb = gradient(model, data)
        for l in range(len(model.weights)):
            model.weights[l] -= step_size * gW[l]
            model.biases[l] -= step_size * gb[l]
        if not all(np.all(np.isfinite(W)) for W in model.weights + model.biases):
            raise TrainingDiverged(f"parameters became non-finite at step {step + 1}")
    history.append((cfg.iterations, _checked_loss(model, data, cfg.iterations)))
    log.debug("training finished, loss %.6f -> %.6f", history[0][1], history[-1][1])
    model.meta["loss_history"] = history
    model.meta["train_config"] = {
        "learning_rate": cfg.learning_rate,
        "iterations": cfg.iterations,
        "hidden": cfg.hidden,
        "init_scale": cfg.init_scale,
        "reduction": cfg.reduction,
    }
    return model


def _checked_loss(model: NNModel, data: LabeledSet, step: int) -> float:
    value = loss(model, data)
    if not np.isfinite(value):
        raise TrainingDiverged(f"loss became {value} at step {step}")
    return value


def predict(model: NNModel, X) -> np.ndarray:
    return np.argmax(forward(model, X), axis=-1)


def evaluate(model: NNModel, data: LabeledSet) -> float:
    """Share of samples whose most probable class equals the target."""
    _require_nonempty(data)
    return float(np.mean(predict(model, data.inputs) == data.targets))


def save_model(model: NNModel, path: str | Path) -> None:
    """Write the model as versioned JSON (weights flattened row-major)."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "layer_sizes": model.layer_sizes,
        "seed": model.seed,
        "weights": [W.ravel().tolist() for W in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "meta": {k: v for k, v in model.meta.items() if k != "loss_history"},
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path: str | Path) -> NNModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {doc.get('version')}")
    sizes = [int(s) for s in doc["layer_sizes"]]
    if len(doc["weights"]) != len(sizes) - 1:
        raise ValueError(f"{path}: layer count does not match layer_sizes")
    weights = []
    for l, flat in enumerate(doc["weights"]):
        if len(flat) != sizes[l] * sizes[l + 1]:
            raise ValueError(f"{path}: layer {l} weights do not chain with layer_sizes")
        weights.append(np.array(flat, dtype=float).reshape(sizes[l], sizes[l + 1]))
    biases = [np.array(b, dtype=float) for b in doc["biases"]]
    return NNModel(sizes, weights, biases, doc.get("seed"), doc.get("meta", {}))
