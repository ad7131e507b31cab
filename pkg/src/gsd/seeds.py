"""Named random substreams derived from a single master seed.

Every source of randomness in the pipeline draws from its own named
substream so that components reproduce independently of each other and
of execution order. Streams are identified by a registered name plus an
optional tuple of integer indices (e.g. per-trial indices); two distinct
paths never share a stream.
"""

from __future__ import annotations

import numpy as np

# Registered stream names. Data generation, weight initialization and the
# two evaluation hypotheses each own a stream; "pcd-cal" feeds threshold
# recalibration during sweeps.
STREAM_IDS = {
    "ingest-split": 0,
    "pcd-data": 1,
    "pcd-init": 2,
    "gnn-data": 3,
    "gnn-init": 4,
    "eval-h0": 5,
    "eval-h1": 6,
    "pcd-cal": 7,
}


def substream(master_seed: int, stream: str, *indices: int) -> np.random.SeedSequence:
    """Seed sequence for the given named stream and index path."""
    if stream not in STREAM_IDS:
        raise KeyError(f"unknown stream name: {stream!r}")
    key = (STREAM_IDS[stream],) + tuple(int(i) for i in indices)
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)


def rng_for(master_seed: int, stream: str, *indices: int) -> np.random.Generator:
    """Generator over the given named substream."""
    return np.random.default_rng(substream(master_seed, stream, *indices))


def seed_int(master_seed: int, stream: str, *indices: int) -> int:
    """Single integer seed derived from a named substream (for TrainConfig)."""
    return int(substream(master_seed, stream, *indices).generate_state(1)[0])
