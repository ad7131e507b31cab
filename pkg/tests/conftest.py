"""Shared fixtures: a small synthetic survey and quick-to-train models."""

from __future__ import annotations

import numpy as np
import pytest

from gsd import ingest, neural, pcd, simdata, synth
from gsd.seeds import substream

MASTER = 20240901


@pytest.fixture(scope="session")
def toy_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "toy.csv"
    simdata.generate_fingerprint_csv(path, simdata.small_config(seed=3))
    return path


@pytest.fixture(scope="session")
def toy_dataset(toy_csv):
    ds = ingest.load_fingerprints(toy_csv, ingest.IngestConfig(floor=1, num_aps=3))
    return ingest.split_locations(ds, test_frac=0.2, val_frac=0.1, seed=1)


@pytest.fixture(scope="session")
def fast_synth():
    return synth.SynthConfig(samples_per_frame=150, estimates_per_location=200)


@pytest.fixture(scope="session")
def toy_val_pairs(toy_dataset, fast_synth):
    return pcd.build_pair_dataset(toy_dataset, fast_synth, 1000, "val", substream(MASTER, "pcd-data", 1))


@pytest.fixture(scope="session")
def small_pcd(toy_dataset, fast_synth, toy_val_pairs):
    """Quick 32-wide PCD trained on the toy survey, threshold calibrated."""
    pairs = pcd.build_pair_dataset(toy_dataset, fast_synth, 4000, "train", substream(MASTER, "pcd-data", 0))
    cfg = neural.TrainConfig(max_epochs=12, early_stop_patience=3, seed=5)
    model, _ = pcd.train_pcd(pairs, toy_val_pairs, cfg, hidden=(32, 32, 32))
    model.threshold = pcd.calibrate_pcd_threshold(model, toy_val_pairs, 0.05)
    return model


def make_sequence(features, label="h0", users=None):
    """Wrap a feature matrix in a FrameSequence for baseline/graph tests."""
    from gsd.trajectory import FrameSequence

    features = np.asarray(features, dtype=float)
    k = features.shape[0]
    if users is None:
        users = np.ones(k, dtype=int)
    return FrameSequence(
        features=features,
        label=label,
        user_of_frame=np.asarray(users),
        true_locations=np.zeros((k, 2)),
    )
