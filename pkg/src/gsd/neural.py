"""Minimal dense-network core with manual backpropagation.

Exactly the machinery the two detectors need: affine layers with
relu/leaky-relu/identity activations, a numerically stable binary
cross-entropy on a logit, reverse-mode gradients, Adam, early-stopped
minibatch training and a versioned JSON weight format. Everything is
float64 and deterministic given a seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError

ACTIVATIONS = ("relu", "leaky_relu", "identity")

FORMAT_VERSION = 1


def _apply_activation(z, activation, slope):
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "leaky_relu":
        return np.where(z > 0, z, slope * z)
    if activation == "identity":
        return z
    raise ConfigError(f"unknown activation {activation!r}")


def _activation_grad(z, activation, slope):
    if activation == "relu":
        return (z > 0).astype(float)
    if activation == "leaky_relu":
        return np.where(z > 0, 1.0, slope)
    if activation == "identity":
        return np.ones_like(z)
    raise ConfigError(f"unknown activation {activation!r}")


@dataclass
class Layer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray     # (out,)
    activation: str
    slope: float = 0.0   # leaky_relu negative-side slope

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ConfigError("layer weight/bias shapes inconsistent")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ConfigError("layer parameters must be finite")


@dataclass
class DenseNetwork:
    layers: list[Layer] = field(default_factory=list)

    def __post_init__(self):
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.weights.shape[1] != prev.weights.shape[0]:
                raise ConfigError("adjacent layer dimensions do not chain")

    @property
    def input_dim(self) -> int:
        return self.layers[0].weights.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weights.shape[0]

    def param_arrays(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.append(layer.weights)
            out.append(layer.bias)
        return out

    def set_params(self, arrays) -> None:
        expected = self.param_arrays()
        if len(arrays) != len(expected):
            raise ConfigError("parameter list length mismatch")
        for i, layer in enumerate(self.layers):
            layer.weights = np.array(arrays[2 * i], dtype=float)
            layer.bias = np.array(arrays[2 * i + 1], dtype=float)

    def copy(self) -> "DenseNetwork":
        return DenseNetwork(
            [Layer(l.weights.copy(), l.bias.copy(), l.activation, l.slope) for l in self.layers]
        )


def new_dense_network(dims, activations, rng, slope=0.01) -> DenseNetwork:
    """Network with the given layer widths, uniform fan-in initialization.

    dims: (d0, d1, ..., dL); activations: one name per layer (length L).
    """
    if len(activations) != len(dims) - 1:
        raise ConfigError("need one activation per layer")
    layers = []
    for fan_in, fan_out, act in zip(dims, dims[1:], activations):
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = rng.uniform(-bound, bound, size=fan_out)
        layers.append(Layer(w, b, act, slope if act == "leaky_relu" else 0.0))
    return DenseNetwork(layers)


def forward(net: DenseNetwork, x: np.ndarray) -> np.ndarray:
    """Single-vector forward pass."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.input_dim,):
        raise ConfigError(f"input shape {x.shape} does not match input dim {net.input_dim}")
    out, _ = forward_batch(net, x[None, :])
    return out[0]


def forward_batch(net: DenseNetwork, X: np.ndarray):
    """Batched forward pass. Returns (output (B, out), cache for backward)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise ConfigError(f"batch shape {X.shape} does not match input dim {net.input_dim}")
    cache = []
    h = X
    for layer in net.layers:
        z = h @ layer.weights.T + layer.bias
        cache.append((h, z))
        h = _apply_activation(z, layer.activation, layer.slope)
    return h, cache


def backward(net: DenseNetwork, x: np.ndarray, upstream: np.ndarray):
    """Gradients for one input. Returns ([(dW, db), ...], dx)."""
    _, cache = forward_batch(net, np.asarray(x, dtype=float)[None, :])
    grads, dX = backward_batch(net, cache, np.asarray(upstream, dtype=float)[None, :])
    return grads, dX[0]


def backward_batch(net: DenseNetwork, cache, upstream: np.ndarray):
    """Reverse-mode gradients through the cached forward pass.

    upstream: (B, out) gradient of the loss w.r.t. the network output.
    Returns ([(dW, db) per layer], dX (B, in)); gradients are summed over
    the batch (scale the upstream for means).
    """
    upstream = np.asarray(upstream, dtype=float)
    if upstream.shape[1] != net.output_dim:
        raise ConfigError("upstream gradient width does not match output dim")
    grads = [None] * len(net.layers)
    delta = upstream
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        h_in, z = cache[i]
        delta = delta * _activation_grad(z, layer.activation, layer.slope)
        grads[i] = (delta.T @ h_in, delta.sum(axis=0))
        delta = delta @ layer.weights
    return grads, delta


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def bce_with_logit(logit: float, label: int) -> float:
    """Binary cross-entropy of a logit: softplus(logit) - label*logit."""
    if not np.isfinite(logit):
        raise NumericalError("logit must be finite")
    return float(bce_with_logit_batch(np.array([logit]), np.array([label]))[0])


def bce_with_logit_batch(logits, labels):
    logits = np.asarray(logits, dtype=float)
    labels = np.asarray(labels, dtype=float)
    softplus = np.maximum(logits, 0.0) + np.log1p(np.exp(-np.abs(logits)))
    return softplus - labels * logits


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 128
    max_epochs: int = 200
    early_stop_patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1:
            raise ConfigError("learning_rate and batch_size must be positive")
        if self.max_epochs < 0:
            raise ConfigError("max_epochs must be >= 0")
        if self.early_stop_patience < 1 or self.early_stop_patience > max(1, self.max_epochs):
            raise ConfigError("need 1 <= early_stop_patience <= max_epochs")


class Adam:
    """Adaptive moment estimation over a flat list of parameter arrays."""

    def __init__(self, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = None
        self._v = None

    def step(self, params, grads):
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + self.eps)


def fit_minibatch(params, num_train, batch_loss_and_grads, val_loss, cfg: TrainConfig):
    """Shared early-stopped Adam loop over minibatch indices.

    params: list of arrays updated in place. batch_loss_and_grads(indices)
    returns (mean loss, grads aligned with params, scaled for the mean).
    Returns (best param copies by validation loss, history rows).
    """
    rng = np.random.default_rng(cfg.seed)
    adam = Adam(cfg.learning_rate)
    best = [p.copy() for p in params]
    best_val = val_loss()
    history = []
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(num_train)
        epoch_loss = 0.0
        for start in range(0, num_train, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = batch_loss_and_grads(idx)
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite training loss at epoch {epoch}")
            adam.step(params, grads)
            epoch_loss += loss * len(idx)
        vloss = val_loss()
        if not np.isfinite(vloss):
            raise NumericalError(f"non-finite validation loss at epoch {epoch}")
        history.append({"epoch": epoch, "train_loss": epoch_loss / num_train, "val_loss": vloss})
        if vloss < best_val:
            best_val = vloss
            best = [p.copy() for p in params]
            stale = 0
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                break
    return best, history


def train(net: DenseNetwork, train_data, val_data, cfg: TrainConfig):
    """Train a plain logit network with BCE. Returns (best net, history).

    train_data/val_data: (inputs (N, in), labels (N,)) with 0/1 labels.
    The input network is not modified.
    """
    X, y = np.asarray(train_data[0], dtype=float), np.asarray(train_data[1], dtype=float)
    Xv, yv = np.asarray(val_data[0], dtype=float), np.asarray(val_data[1], dtype=float)
    if X.shape[0] == 0 or Xv.shape[0] == 0:
        raise ConfigError("train and validation sets must be nonempty")
    if net.output_dim != 1:
        raise ConfigError("train expects a single-logit network")
    work = net.copy()
    params = work.param_arrays()

    def batch_loss_and_grads(idx):
        out, cache = forward_batch(work, X[idx])
        logits = out[:, 0]
        loss = float(np.mean(bce_with_logit_batch(logits, y[idx])))
        if not np.isfinite(loss):
            raise NumericalError("non-finite training loss")
        dlogit = (sigmoid(logits) - y[idx]) / len(idx)
        grads_pairs, _ = backward_batch(work, cache, dlogit[:, None])
        flat = []
        for dw, db in grads_pairs:
            flat.append(dw)
            flat.append(db)
        return loss, flat

    def val_loss():
        out, _ = forward_batch(work, Xv)
        return float(np.mean(bce_with_logit_batch(out[:, 0], yv)))

    best, history = fit_minibatch(params, X.shape[0], batch_loss_and_grads, val_loss, cfg)
    work.set_params(best)
    return work, history


def network_to_dict(net: DenseNetwork) -> dict:
    return {
        "layers": [
            {
                "in": int(l.weights.shape[1]),
                "out": int(l.weights.shape[0]),
                "activation": l.activation,
                "slope": float(l.slope),
                "weights": [float(v) for v in l.weights.ravel()],  # row-major
                "bias": [float(v) for v in l.bias],
            }
            for l in net.layers
        ]
    }


def network_from_dict(d: dict) -> DenseNetwork:
    layers = []
    for spec in d["layers"]:
        w = np.array(spec["weights"], dtype=float).reshape(spec["out"], spec["in"])
        b = np.array(spec["bias"], dtype=float)
        layers.append(Layer(w, b, spec["activation"], float(spec.get("slope", 0.0))))
    return DenseNetwork(layers)


def save_model_file(path, kind: str, payload: dict) -> None:
    """Write a versioned model JSON file."""
    doc = {"format_version": FORMAT_VERSION, "kind": kind}
    doc.update(payload)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model_file(path, kind: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported model format_version in {path}")
    if doc.get("kind") != kind:
        raise ConfigError(f"model file {path} has kind {doc.get('kind')!r}, expected {kind!r}")
    return doc
