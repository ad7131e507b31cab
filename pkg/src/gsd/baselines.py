"""Clustering-based spoofing detectors.

Each detector clusters a sequence's RSS vectors in dB space and uses the
number of clusters as its test statistic; noise/outlier points count as
their own singleton clusters (a lone frame from a distinct location is
attack evidence). The integer decision threshold is calibrated on H0
trials to a target false-alarm probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.cluster import DBSCAN, OPTICS, Birch

from .errors import ConfigError, InsufficientDataError
from .ingest import watts_to_dbm
from .trajectory import FrameSequence

ALGORITHMS = ("dbscan", "optics", "birch")


@dataclass
class ClusterDetector:
    """One clustering algorithm plus its parameters and decision threshold."""

    algorithm: str
    params: dict = field(default_factory=dict)
    decision_threshold: int | None = None  # decide attack iff count > threshold

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown clustering algorithm {self.algorithm!r}")
        defaults = DEFAULT_PARAMS[self.algorithm]
        merged = dict(defaults)
        merged.update(self.params)
        unknown = set(merged) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown {self.algorithm} parameters: {sorted(unknown)}")
        if any(v <= 0 for v in merged.values()):
            raise ConfigError(f"{self.algorithm} parameters must be positive")
        self.params = merged
        if self.decision_threshold is not None and self.decision_threshold < 1:
            raise ConfigError("decision threshold must be >= 1")


# Tuned once on validation H0/H1 trials at the default operating point, then
# frozen. OPTICS needs a real density floor: with min_pts=2 its xi extraction
# over-fragments same-location frame groups and the count anti-correlates with
# the hypothesis.
DEFAULT_PARAMS = {
    "dbscan": {"eps_db": 6.0, "min_pts": 2},
    "optics": {"min_pts": 6, "xi": 0.2},
    "birch": {"branching": 50, "radius_db": 6.0},
}


def default_detectors(overrides: dict | None = None) -> list[ClusterDetector]:
    overrides = overrides or {}
    return [ClusterDetector(name, dict(overrides.get(name, {}))) for name in ALGORITHMS]


def _count_with_noise_singletons(labels: np.ndarray) -> int:
    labels = np.asarray(labels)
    n_noise = int(np.sum(labels == -1))
    n_clusters = len(set(labels[labels >= 0].tolist()))
    return n_clusters + n_noise


def cluster_count(detector: ClusterDetector, frames: FrameSequence) -> int:
    """Number of clusters among the sequence's feature vectors (dB space)."""
    X = watts_to_dbm(frames.features)
    k = X.shape[0]
    if k < 1:
        raise ConfigError("need at least one frame")
    if k == 1:
        return 1
    # all-identical rows: degenerate for reachability-based extraction
    if np.all(X == X[0]):
        return 1
    p = detector.params
    if detector.algorithm == "dbscan":
        labels = DBSCAN(eps=p["eps_db"], min_samples=int(p["min_pts"])).fit(X).labels_
    elif detector.algorithm == "optics":
        min_pts = int(p["min_pts"])
        if k < min_pts:
            return k  # every point below the density floor: all singletons
        labels = OPTICS(min_samples=min_pts, xi=p["xi"]).fit(X).labels_
    else:
        labels = Birch(
            branching_factor=int(p["branching"]), threshold=p["radius_db"], n_clusters=None
        ).fit(X).labels_
    count = _count_with_noise_singletons(labels)
    return max(count, 1)


def threshold_from_counts(counts, target_pfa: float) -> int:
    """Smallest integer threshold with empirical P(count > t) <= target."""
    if not 0 < target_pfa < 1:
        raise ConfigError("target_pfa must be in (0, 1)")
    counts = np.asarray(counts, dtype=int)
    if counts.size == 0:
        raise ConfigError("no calibration counts")
    for t in range(1, int(counts.max()) + 2):
        if np.mean(counts > t) <= target_pfa:
            return t
    return int(counts.max())  # unreachable; loop always terminates at max


def calibrate_threshold(detector: ClusterDetector, h0_trials, target_pfa: float) -> int:
    """Calibrate the integer decision threshold on H0 sequences."""
    if len(h0_trials) < 200:
        raise InsufficientDataError(f"need >= 200 H0 trials, got {len(h0_trials)}")
    counts = [cluster_count(detector, seq) for seq in h0_trials]
    return threshold_from_counts(counts, target_pfa)
