"""Labeled frame-sequence generation under both hypotheses.

A scenario is a straight-line walk through the measurement region sampled
at the frame rate; each sampled point snaps to the nearest surveyed
location, whose true RSS is turned into one fresh finite-sample estimate.
Under an attack, two independent walks are interleaved by per-frame fair
coin flips.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InfeasibleScenarioError, InsufficientDataError
from .ingest import FingerprintDataset, watts_to_dbm
from .synth import SynthConfig, synth_estimate

H0 = "h0"
H1 = "h1"

RESAMPLE_BUDGET = 1000


@dataclass(frozen=True)
class ScenarioConfig:
    num_frames: int
    frame_rate: float      # frames per second
    speed: float           # m/s, shared by both users
    hypothesis: str
    seed: object = 0       # int or numpy SeedSequence

    def __post_init__(self):
        if self.num_frames < 2:
            raise ConfigError("num_frames must be >= 2")
        if self.frame_rate <= 0:
            raise ConfigError("frame_rate must be positive")
        if self.speed < 0:
            raise ConfigError("speed must be nonnegative")
        if self.hypothesis not in (H0, H1):
            raise ConfigError(f"hypothesis must be {H0!r} or {H1!r}")


@dataclass
class FrameSequence:
    """K frames of RSS estimates with ground truth for evaluation."""

    features: np.ndarray       # (K, M) watts
    label: str                 # H0 or H1
    user_of_frame: np.ndarray  # (K,) in {1, 2}; all 1 under H0
    true_locations: np.ndarray  # (K, 2) diagnostic

    @property
    def num_frames(self) -> int:
        return self.features.shape[0]


def dataset_region(ds: FingerprintDataset, split: str):
    """Axis-aligned bounding box (xmin, ymin, xmax, ymax) of a split."""
    _, coords, _ = ds.split_arrays(split)
    if coords.shape[0] == 0:
        raise InsufficientDataError(f"split {split!r} is empty")
    return (
        float(coords[:, 0].min()),
        float(coords[:, 1].min()),
        float(coords[:, 0].max()),
        float(coords[:, 1].max()),
    )


def gen_trajectory(region, cfg: ScenarioConfig, rng=None) -> np.ndarray:
    """Straight-line positions at t = k / frame_rate, k = 0..K-1.

    The start point is uniform in the region and the direction uniform in
    [0, 2pi); placement is resampled until the whole segment lies inside
    the region, up to a fixed budget.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    xmin, ymin, xmax, ymax = region
    if not (xmax >= xmin and ymax >= ymin):
        raise ConfigError("region is empty")
    k = np.arange(cfg.num_frames)
    t = k / cfg.frame_rate
    for _ in range(RESAMPLE_BUDGET):
        x0 = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])
        theta = rng.uniform(0.0, 2.0 * np.pi)
        u = np.array([np.cos(theta), np.sin(theta)])
        points = x0[None, :] + u[None, :] * (cfg.speed * t)[:, None]
        # the region is convex, so endpoint containment implies the segment fits
        end = points[-1]
        if xmin <= end[0] <= xmax and ymin <= end[1] <= ymax:
            return points
    raise InfeasibleScenarioError(
        f"segment of length {cfg.speed * (cfg.num_frames - 1) / cfg.frame_rate:.2f} m "
        f"does not fit in region {region} after {RESAMPLE_BUDGET} attempts"
    )


def nearest_location_ids(points: np.ndarray, ds: FingerprintDataset, split: str) -> np.ndarray:
    """Nearest surveyed location per point (Euclidean, ties to lowest id)."""
    ids, coords, _ = ds.split_arrays(split)
    if len(ids) == 0:
        raise InsufficientDataError(f"split {split!r} is empty")
    # ids ascend, so argmin's first-match rule implements the tie-break
    d2 = ((points[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2)
    return ids[np.argmin(d2, axis=1)]


def snap_to_dataset(
    points: np.ndarray,
    ds: FingerprintDataset,
    split: str,
    synth_cfg: SynthConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """One fresh RSS estimate of the nearest location's truth per point."""
    snap_ids = nearest_location_ids(points, ds, split)
    out = np.empty((len(snap_ids), ds.num_receivers))
    for i, loc_id in enumerate(snap_ids):
        truth = ds.by_id(int(loc_id)).true_rss + synth_cfg.noise_floor
        out[i] = synth_estimate(truth, synth_cfg.samples_per_frame, rng)
    return out


def gen_sequence(ds: FingerprintDataset, cfg: ScenarioConfig, synth_cfg: SynthConfig, split: str = "test") -> FrameSequence:
    """Generate one labeled frame sequence under cfg.hypothesis.

    H0: a single walk. H1: two walks with independent starting points and
    directions; each frame takes user 1's or user 2's vector with
    probability 1/2, independently across frames.
    """
    root = cfg.seed if isinstance(cfg.seed, np.random.SeedSequence) else np.random.SeedSequence(cfg.seed)
    traj1_ss, traj2_ss, coin_ss, synth_ss = root.spawn(4)
    region = dataset_region(ds, split)
    synth_rng = np.random.default_rng(synth_ss)

    points1 = gen_trajectory(region, cfg, np.random.default_rng(traj1_ss))
    if cfg.hypothesis == H0:
        features = snap_to_dataset(points1, ds, split, synth_cfg, synth_rng)
        return FrameSequence(
            features=features,
            label=H0,
            user_of_frame=np.ones(cfg.num_frames, dtype=int),
            true_locations=points1,
        )

    points2 = gen_trajectory(region, cfg, np.random.default_rng(traj2_ss))
    feats1 = snap_to_dataset(points1, ds, split, synth_cfg, synth_rng)
    feats2 = snap_to_dataset(points2, ds, split, synth_cfg, synth_rng)
    coin_rng = np.random.default_rng(coin_ss)
    user = np.where(coin_rng.random(cfg.num_frames) < 0.5, 1, 2)
    features = np.where((user == 1)[:, None], feats1, feats2)
    true_locations = np.where((user == 1)[:, None], points1, points2)
    return FrameSequence(
        features=features,
        label=H1,
        user_of_frame=user,
        true_locations=true_locations,
    )


def scenario_to_csv(seq: FrameSequence, ds: FingerprintDataset, split: str = "test") -> str:
    """Debug dump: frame_idx,user,true_x,true_y,snap_id,rss_1..rss_M (dBm)."""
    m = seq.features.shape[1]
    snap_ids = nearest_location_ids(seq.true_locations, ds, split)
    header = "frame_idx,user,true_x,true_y,snap_id," + ",".join(f"rss_{i + 1}" for i in range(m))
    lines = [header]
    dbm = watts_to_dbm(seq.features)
    for k in range(seq.num_frames):
        vals = ",".join(f"{v:.4f}" for v in dbm[k])
        lines.append(
            f"{k},{seq.user_of_frame[k]},{float(seq.true_locations[k, 0])!r},"
            f"{float(seq.true_locations[k, 1])!r},{int(snap_ids[k])},{vals}"
        )
    return "\n".join(lines) + "\n"
