"""Position-change detector over pairs of RSS vectors.

A fixed log-domain featurization feeds an asymmetric dense network whose
two-way average gives an exactly symmetric statistic: high means the two
frames likely came from different locations. Trained on balanced
same/different-location pairs with BCE, thresholded at an empirical
quantile of same-location validation statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import neural
from .errors import ConfigError, InsufficientDataError
from .ingest import FingerprintDataset
from .synth import SynthConfig, synth_estimate_pool

DEFAULT_EPSILON_LOG = 1e-12  # watts; floor for the log layers
DEFAULT_HIDDEN = (512, 512, 512)
LEAKY_SLOPE = 0.01


@dataclass
class PcdModel:
    """Asymmetric network plus calibration for the symmetrized statistic."""

    aux_net: neural.DenseNetwork
    epsilon_log: float = DEFAULT_EPSILON_LOG
    threshold: float | None = None

    @property
    def num_receivers(self) -> int:
        if self.aux_net.input_dim % 3 != 0:
            raise ConfigError("PCD input width must be 3*M")
        return self.aux_net.input_dim // 3


def new_pcd_model(num_receivers: int, rng, hidden=DEFAULT_HIDDEN, epsilon_log=DEFAULT_EPSILON_LOG) -> PcdModel:
    dims = (3 * num_receivers,) + tuple(hidden) + (1,)
    activations = ["leaky_relu"] * len(hidden) + ["identity"]
    net = neural.new_dense_network(dims, activations, rng, slope=LEAKY_SLOPE)
    return PcdModel(aux_net=net, epsilon_log=epsilon_log)


def _check_positive(R):
    R = np.asarray(R, dtype=float)
    if not np.all(np.isfinite(R)) or np.any(R <= 0):
        raise ConfigError("RSS entries must be finite and strictly positive")
    return R


def featurize_pairs(R: np.ndarray, Rp: np.ndarray, epsilon_log: float) -> np.ndarray:
    """Log-domain features for a batch of vector pairs: (B, 3M).

    Blocks: 10*log10(r + eps), 10*log10(r' + eps), and a signed log of the
    difference, sign(d) * 10*log10(1 + |d|/eps), which is odd and defined
    for differences of either sign.
    """
    R = _check_positive(np.atleast_2d(R))
    Rp = _check_positive(np.atleast_2d(Rp))
    if R.shape != Rp.shape:
        raise ConfigError("pair batches must have identical shapes")
    eps = float(epsilon_log)
    if eps <= 0:
        raise ConfigError("epsilon_log must be positive")
    d = R - Rp
    block3 = np.sign(d) * 10.0 * np.log10(1.0 + np.abs(d) / eps)
    return np.hstack([10.0 * np.log10(R + eps), 10.0 * np.log10(Rp + eps), block3])


def featurize_pair(r: np.ndarray, rp: np.ndarray, epsilon_log: float = DEFAULT_EPSILON_LOG) -> np.ndarray:
    """Feature vector of length 3M for one pair."""
    return featurize_pairs(r[None, :], rp[None, :], epsilon_log)[0]


def pcd_statistics(model: PcdModel, R: np.ndarray, Rp: np.ndarray) -> np.ndarray:
    """Symmetrized statistic for a batch of pairs."""
    Xf = featurize_pairs(R, Rp, model.epsilon_log)
    Xr = featurize_pairs(Rp, R, model.epsilon_log)
    out, _ = neural.forward_batch(model.aux_net, np.vstack([Xf, Xr]))
    n = Xf.shape[0]
    return (out[:n, 0] + out[n:, 0]) / 2.0


def pcd_statistic(model: PcdModel, r: np.ndarray, rp: np.ndarray) -> float:
    """Symmetrized statistic; exactly equal under argument swap."""
    return float(pcd_statistics(model, np.atleast_2d(r), np.atleast_2d(rp))[0])


@dataclass
class PairDataset:
    """Balanced same/different-location pairs: first P rows carry label 0."""

    left: np.ndarray    # (2P, M) watts
    right: np.ndarray   # (2P, M)
    labels: np.ndarray  # (2P,) 0 = same location, 1 = different

    def __post_init__(self):
        self.left = _check_positive(self.left)
        self.right = _check_positive(self.right)
        self.labels = np.asarray(self.labels)
        n_same = int(np.sum(self.labels == 0))
        n_diff = int(np.sum(self.labels == 1))
        if n_same != n_diff or n_same + n_diff != len(self.labels):
            raise ConfigError("pair dataset must be balanced with 0/1 labels")
        if not (self.left.shape == self.right.shape and self.left.shape[0] == len(self.labels)):
            raise ConfigError("pair arrays misaligned")

    @property
    def pairs_per_class(self) -> int:
        return len(self.labels) // 2

    def same_pairs(self):
        mask = self.labels == 0
        return self.left[mask], self.right[mask]

    def diff_pairs(self):
        mask = self.labels == 1
        return self.left[mask], self.right[mask]


def build_pair_dataset(
    ds: FingerprintDataset,
    synth_cfg: SynthConfig,
    pairs_per_class: int,
    split: str,
    seed,
) -> PairDataset:
    """Sample P same-location and P different-location estimate pairs.

    A pool of E synthetic estimates per location is generated first; same
    pairs take one location and two distinct pool entries, different pairs
    take two distinct locations and one entry each.
    """
    if pairs_per_class < 1:
        raise ConfigError("pairs_per_class must be >= 1")
    ids, _, rss = ds.split_arrays(split)
    n_loc = len(ids)
    if n_loc < 2:
        raise InsufficientDataError(f"split {split!r} has {n_loc} locations, need >= 2")
    if synth_cfg.estimates_per_location < 2:
        raise ConfigError("estimates_per_location must be >= 2 for same-location pairs")

    rng = np.random.default_rng(seed)
    truth = rss + synth_cfg.noise_floor
    pool = synth_estimate_pool(truth, synth_cfg.samples_per_frame, synth_cfg.estimates_per_location, rng)
    E = synth_cfg.estimates_per_location
    P = pairs_per_class

    # same-location: one location, two estimate indices without replacement
    d_same = rng.integers(0, n_loc, size=P)
    e1 = rng.integers(0, E, size=P)
    e2 = rng.integers(0, E - 1, size=P)
    e2 = e2 + (e2 >= e1)
    same_left = pool[d_same, e1]
    same_right = pool[d_same, e2]

    # different-location: two locations without replacement, one estimate each
    da = rng.integers(0, n_loc, size=P)
    db = rng.integers(0, n_loc - 1, size=P)
    db = db + (db >= da)
    diff_left = pool[da, rng.integers(0, E, size=P)]
    diff_right = pool[db, rng.integers(0, E, size=P)]

    return PairDataset(
        left=np.vstack([same_left, diff_left]),
        right=np.vstack([same_right, diff_right]),
        labels=np.concatenate([np.zeros(P, dtype=int), np.ones(P, dtype=int)]),
    )


def _pair_logits(net, feats_fwd, feats_rev, idx=None, chunk=8192):
    """Symmetrized logits over (a subset of) featurized pairs."""
    if idx is not None:
        feats_fwd = feats_fwd[idx]
        feats_rev = feats_rev[idx]
    n = feats_fwd.shape[0]
    out = np.empty(n)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        stacked = np.vstack([feats_fwd[start:stop], feats_rev[start:stop]])
        o, _ = neural.forward_batch(net, stacked)
        m = stop - start
        out[start:stop] = (o[:m, 0] + o[m:, 0]) / 2.0
    return out


def train_pcd(
    pairs: PairDataset,
    val_pairs: PairDataset,
    cfg: neural.TrainConfig,
    hidden=DEFAULT_HIDDEN,
    epsilon_log=DEFAULT_EPSILON_LOG,
) -> tuple[PcdModel, list]:
    """Train the symmetrized pair statistic with BCE. Returns (model, history).

    The symmetrized statistic itself is the training logit, so training and
    inference see the same function. The returned model has no threshold yet.
    """
    for p in (pairs, val_pairs):
        if np.sum(p.labels == 0) == 0 or np.sum(p.labels == 1) == 0:
            raise ConfigError("pair dataset must contain both classes")
    m = pairs.left.shape[1]
    init_rng = np.random.default_rng(cfg.seed)
    model = new_pcd_model(m, init_rng, hidden=hidden, epsilon_log=epsilon_log)
    net = model.aux_net

    feats_fwd = featurize_pairs(pairs.left, pairs.right, epsilon_log)
    feats_rev = featurize_pairs(pairs.right, pairs.left, epsilon_log)
    vfeats_fwd = featurize_pairs(val_pairs.left, val_pairs.right, epsilon_log)
    vfeats_rev = featurize_pairs(val_pairs.right, val_pairs.left, epsilon_log)
    y = pairs.labels.astype(float)
    yv = val_pairs.labels.astype(float)

    params = net.param_arrays()

    def batch_loss_and_grads(idx):
        stacked = np.vstack([feats_fwd[idx], feats_rev[idx]])
        out, cache = neural.forward_batch(net, stacked)
        b = len(idx)
        logits = (out[:b, 0] + out[b:, 0]) / 2.0
        loss = float(np.mean(neural.bce_with_logit_batch(logits, y[idx])))
        dlogit = (neural.sigmoid(logits) - y[idx]) / b
        upstream = np.concatenate([0.5 * dlogit, 0.5 * dlogit])[:, None]
        grads_pairs, _ = neural.backward_batch(net, cache, upstream)
        flat = []
        for dw, db in grads_pairs:
            flat.append(dw)
            flat.append(db)
        return loss, flat

    def val_loss():
        logits = _pair_logits(net, vfeats_fwd, vfeats_rev)
        return float(np.mean(neural.bce_with_logit_batch(logits, yv)))

    best, history = neural.fit_minibatch(params, len(y), batch_loss_and_grads, val_loss, cfg)
    net.set_params(best)
    return model, history


def pair_accuracy(model: PcdModel, pairs: PairDataset, threshold: float = 0.0) -> float:
    """Fraction of pairs classified correctly at the given threshold."""
    stats = pcd_statistics(model, pairs.left, pairs.right)
    pred = (stats > threshold).astype(int)
    return float(np.mean(pred == pairs.labels))


def calibrate_pcd_threshold(model: PcdModel, val_pairs: PairDataset, target_same_fa: float) -> float:
    """Empirical (1 - target)-quantile of the statistic on same-location pairs.

    Same-location pairs then exceed the threshold (i.e. are wrongly declared
    "different") at a rate of about target_same_fa.
    """
    if not 0 < target_same_fa < 1:
        raise ConfigError("target_same_fa must be in (0, 1)")
    left, right = val_pairs.same_pairs()
    if left.shape[0] == 0:
        raise ConfigError("no same-location validation pairs")
    stats = np.sort(pcd_statistics(model, left, right))
    n = len(stats)
    k = int(np.ceil((1.0 - target_same_fa) * n))
    k = min(max(k, 1), n)
    return float(stats[k - 1])


def pcd_to_dict(model: PcdModel) -> dict:
    return {
        "num_receivers": model.num_receivers,
        "epsilon_log": float(model.epsilon_log),
        "threshold": None if model.threshold is None else float(model.threshold),
        "aux_net": neural.network_to_dict(model.aux_net),
    }


def pcd_from_dict(d: dict) -> PcdModel:
    model = PcdModel(
        aux_net=neural.network_from_dict(d["aux_net"]),
        epsilon_log=float(d["epsilon_log"]),
        threshold=None if d.get("threshold") is None else float(d["threshold"]),
    )
    if model.num_receivers != d["num_receivers"]:
        raise ConfigError("PCD model file inconsistent: num_receivers vs input width")
    return model


def save_pcd(path, model: PcdModel) -> None:
    neural.save_model_file(path, "pcd", pcd_to_dict(model))


def load_pcd(path) -> PcdModel:
    return pcd_from_dict(neural.load_model_file(path, "pcd"))
