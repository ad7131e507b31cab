"""Message-passing graph classifier producing the spoofing test statistic.

Three message-passing layers; at each one a node's feature is updated by
a single dense+ReLU map of (its previous feature, the sum of dense+ReLU
messages computed from each (node, neighbor) feature pair). The statistic
is a trainable affine map of the mean final node feature and is used as a
logit during BCE training; compare it to a threshold to decide.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import neural
from .errors import ConfigError
from .graphgen import DetectionGraph
from .trajectory import H0, H1

HIDDEN = 64
NUM_LAYERS = 3


@dataclass
class GnnLayer:
    g1: neural.DenseNetwork  # update map: (prev_dim + hidden) -> hidden, relu
    g2: neural.DenseNetwork  # message map: (2 * prev_dim) -> hidden, relu


@dataclass
class GnnModel:
    layers: list[GnnLayer]
    readout_weights: np.ndarray  # (hidden,)
    readout_bias: np.ndarray     # (1,)

    def __post_init__(self):
        self.readout_weights = np.asarray(self.readout_weights, dtype=float)
        self.readout_bias = np.asarray(self.readout_bias, dtype=float).reshape(1)
        prev = 1
        for i, layer in enumerate(self.layers):
            hidden = layer.g1.output_dim
            if layer.g2.input_dim != 2 * prev:
                raise ConfigError(f"layer {i}: G2 input width must be {2 * prev}")
            if layer.g1.input_dim != prev + layer.g2.output_dim:
                raise ConfigError(f"layer {i}: G1 input width must be {prev + layer.g2.output_dim}")
            prev = hidden
        if self.readout_weights.shape != (prev,):
            raise ConfigError("readout width must match final feature width")

    def param_arrays(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.g1.param_arrays())
            out.extend(layer.g2.param_arrays())
        out.append(self.readout_weights)
        out.append(self.readout_bias)
        return out

    def set_params(self, arrays) -> None:
        expected = self.param_arrays()
        if len(arrays) != len(expected):
            raise ConfigError("parameter list length mismatch")
        pos = 0
        for layer in self.layers:
            layer.g1.set_params(arrays[pos : pos + 2])
            pos += 2
            layer.g2.set_params(arrays[pos : pos + 2])
            pos += 2
        self.readout_weights = np.array(arrays[pos], dtype=float)
        self.readout_bias = np.array(arrays[pos + 1], dtype=float).reshape(1)

    def copy(self) -> "GnnModel":
        return GnnModel(
            layers=[GnnLayer(l.g1.copy(), l.g2.copy()) for l in self.layers],
            readout_weights=self.readout_weights.copy(),
            readout_bias=self.readout_bias.copy(),
        )


def _single(in_dim, out_dim, rng) -> neural.DenseNetwork:
    return neural.new_dense_network((in_dim, out_dim), ["relu"], rng)


def new_gnn_model(rng, hidden: int = HIDDEN, num_layers: int = NUM_LAYERS) -> GnnModel:
    """Fresh model; layer widths chain 1 -> hidden -> ... -> hidden."""
    layers = []
    prev = 1
    for _ in range(num_layers):
        g2 = _single(2 * prev, hidden, rng)
        g1 = _single(prev + hidden, hidden, rng)
        layers.append(GnnLayer(g1=g1, g2=g2))
        prev = hidden
    bound = 1.0 / np.sqrt(hidden)
    return GnnModel(
        layers=layers,
        readout_weights=rng.uniform(-bound, bound, size=hidden),
        readout_bias=rng.uniform(-bound, bound, size=1),
    )


def _forward_cached(model: GnnModel, g: DetectionGraph):
    """Forward pass keeping everything backward needs."""
    k = g.num_nodes
    src, dst = np.nonzero(g.adjacency)  # both directions of every edge
    phi = g.node_index_feature[:, None].astype(float)
    cache = {"src": src, "dst": dst, "phis": [phi], "g1": [], "g2": [], "f_prev": []}
    for layer in model.layers:
        f_prev = phi.shape[1]
        msg_in = np.hstack([phi[src], phi[dst]])
        msg_out, g2_cache = neural.forward_batch(layer.g2, msg_in)
        agg = np.zeros((k, layer.g2.output_dim))
        np.add.at(agg, src, msg_out)
        g1_in = np.hstack([phi, agg])
        phi, g1_cache = neural.forward_batch(layer.g1, g1_in)
        cache["g2"].append(g2_cache)
        cache["g1"].append(g1_cache)
        cache["phis"].append(phi)
        cache["f_prev"].append(f_prev)
    mean_feat = phi.mean(axis=0)
    stat = float(model.readout_weights @ mean_feat + model.readout_bias[0])
    cache["mean_feat"] = mean_feat
    return stat, cache


def gnn_forward(model: GnnModel, g: DetectionGraph) -> float:
    """Test statistic for one graph; deterministic in (adjacency, features)."""
    stat, _ = _forward_cached(model, g)
    return stat


def _backward_from_cache(model: GnnModel, cache, upstream: float):
    """Gradients of upstream * statistic w.r.t. all parameters."""
    k = cache["phis"][0].shape[0]
    src, dst = cache["src"], cache["dst"]
    d_readout_w = upstream * cache["mean_feat"]
    d_readout_b = np.array([upstream])
    dphi = np.tile(upstream * model.readout_weights / k, (k, 1))
    layer_grads = [None] * len(model.layers)
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        f_prev = cache["f_prev"][i]
        g1_grads, d_g1_in = neural.backward_batch(layer.g1, cache["g1"][i], dphi)
        dphi_prev = d_g1_in[:, :f_prev].copy()
        d_agg = d_g1_in[:, f_prev:]
        d_msg_out = d_agg[src]
        g2_grads, d_msg_in = neural.backward_batch(layer.g2, cache["g2"][i], d_msg_out)
        np.add.at(dphi_prev, src, d_msg_in[:, :f_prev])
        np.add.at(dphi_prev, dst, d_msg_in[:, f_prev:])
        layer_grads[i] = (g1_grads[0], g2_grads[0])
        dphi = dphi_prev
    flat = []
    for (g1_wb, g2_wb) in layer_grads:
        flat.extend([g1_wb[0], g1_wb[1], g2_wb[0], g2_wb[1]])
    flat.append(d_readout_w)
    flat.append(d_readout_b)
    return flat


def gnn_backward(model: GnnModel, g: DetectionGraph, upstream: float, cache=None):
    """Parameter gradients of upstream * statistic (recomputes forward if needed)."""
    if cache is None:
        _, cache = _forward_cached(model, g)
    return _backward_from_cache(model, cache, float(upstream))


def train_gnn(train_graphs, val_graphs, cfg: neural.TrainConfig, hidden: int = HIDDEN, num_layers: int = NUM_LAYERS):
    """Train on labeled graphs [(DetectionGraph, 0|1)]; 1 marks an attack.

    Returns (best-validation model, history). Deterministic given cfg.seed.
    """
    labels = np.array([int(lbl) for _, lbl in train_graphs], dtype=float)
    if len(train_graphs) == 0 or len(val_graphs) == 0:
        raise ConfigError("train and validation graph sets must be nonempty")
    if len(set(labels.tolist())) < 2:
        raise ConfigError("training set must contain both classes")
    graphs = [g for g, _ in train_graphs]
    vgraphs = [g for g, _ in val_graphs]
    vlabels = np.array([int(lbl) for _, lbl in val_graphs], dtype=float)

    model = new_gnn_model(np.random.default_rng(cfg.seed), hidden=hidden, num_layers=num_layers)
    params = model.param_arrays()

    def batch_loss_and_grads(idx):
        total = [np.zeros_like(p) for p in params]
        losses = np.empty(len(idx))
        for j, i in enumerate(idx):
            stat, cache = _forward_cached(model, graphs[i])
            losses[j] = neural.bce_with_logit_batch(np.array([stat]), np.array([labels[i]]))[0]
            dlogit = (float(neural.sigmoid(stat)) - labels[i]) / len(idx)
            for acc, grad in zip(total, _backward_from_cache(model, cache, dlogit)):
                acc += grad
        return float(losses.mean()), total

    def val_loss():
        stats = np.array([gnn_forward(model, g) for g in vgraphs])
        return float(np.mean(neural.bce_with_logit_batch(stats, vlabels)))

    best, history = neural.fit_minibatch(params, len(graphs), batch_loss_and_grads, val_loss, cfg)
    model.set_params(best)
    return model, history


def decide(model: GnnModel, g: DetectionGraph, threshold: float) -> str:
    """Declare an attack iff the statistic exceeds the threshold."""
    return H1 if gnn_forward(model, g) > threshold else H0


def gnn_to_dict(model: GnnModel) -> dict:
    return {
        "hidden": int(model.layers[0].g1.output_dim) if model.layers else 0,
        "layers": [
            {"g1": neural.network_to_dict(l.g1), "g2": neural.network_to_dict(l.g2)}
            for l in model.layers
        ],
        "readout": {
            "weights": [float(v) for v in model.readout_weights],
            "bias": float(model.readout_bias[0]),
        },
    }


def gnn_from_dict(d: dict) -> GnnModel:
    layers = [
        GnnLayer(
            g1=neural.network_from_dict(spec["g1"]),
            g2=neural.network_from_dict(spec["g2"]),
        )
        for spec in d["layers"]
    ]
    return GnnModel(
        layers=layers,
        readout_weights=np.array(d["readout"]["weights"], dtype=float),
        readout_bias=np.array([d["readout"]["bias"]], dtype=float),
    )


def save_gnn(path, model: GnnModel) -> None:
    neural.save_model_file(path, "gnn", gnn_to_dict(model))


def load_gnn(path) -> GnnModel:
    return gnn_from_dict(neural.load_model_file(path, "gnn"))
