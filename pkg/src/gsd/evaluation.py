"""Monte Carlo evaluation harness.

Reproduces the four experiments: ROC curves, and detection-probability
sweeps versus user speed, frame count and per-frame sample count at a
fixed false-alarm target. Every trial owns a seed derived from the master
seed, a hypothesis stream, an experiment code, a purpose code
(calibration / scoring / fresh check) and its trial index, so runs are
bit-reproducible and H0/H1 generation never share a stream.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import baselines as bl
from . import gnn as gnn_mod
from . import pcd as pcd_mod
from .errors import ConfigError, InfeasibleScenarioError, MissingPrerequisiteError
from .graphgen import DetectionGraph, build_graph
from .ingest import FingerprintDataset
from .seeds import substream
from .synth import SynthConfig
from .trajectory import H0, H1, FrameSequence, ScenarioConfig, gen_sequence

EXPERIMENTS = ("roc", "speed", "frames", "samples")
AXES = ("speed", "num_frames", "num_samples")

# index namespaces inside the eval-h0 / eval-h1 / pcd-cal streams
EXP_CODES = {"roc": 0, "speed": 1, "frames": 2, "samples": 3, "gnn-corpus": 4, "inspect": 5}
PURPOSE_CAL = 0
PURPOSE_SCORE = 1
PURPOSE_CHECK = 2

GSD = "gsd"


@dataclass(frozen=True)
class ExperimentConfig:
    trials_per_hypothesis: int = 500
    frame_rate: float = 10.0
    num_frames: int = 30
    speed: float = 1.0
    target_pfa: float = 0.1
    speed_grid: tuple = (0.0, 0.5, 1.0, 2.0, 3.0, 5.0)
    frames_grid: tuple = (10, 20, 30, 40, 50)
    samples_grid: tuple = (25, 50, 100, 150, 250)
    gnn_train_graphs: int = 2000
    gnn_val_graphs: int = 500
    workers: int | None = None  # None: all available cores

    def __post_init__(self):
        if self.trials_per_hypothesis < 1 or self.num_frames < 2:
            raise ConfigError("trial and frame counts must be positive")
        if not (0 < self.target_pfa < 1):
            raise ConfigError("target_pfa must be in (0, 1)")
        for grid in (self.speed_grid, self.frames_grid, self.samples_grid):
            if len(grid) == 0:
                raise ConfigError("sweep grids must be nonempty")

    def resolved_workers(self) -> int:
        if self.workers is not None:
            return max(1, int(self.workers))
        return max(1, os.cpu_count() or 1)


@dataclass
class DetectorBank:
    """Trained models plus baseline detectors evaluated side by side."""

    pcd: pcd_mod.PcdModel
    gnn: gnn_mod.GnnModel
    detectors: list = field(default_factory=bl.default_detectors)
    pcd_target_same_fa: float = 0.05

    def names(self) -> list[str]:
        return [GSD] + [d.algorithm for d in self.detectors]

    def require_trained(self) -> None:
        if self.pcd.threshold is None:
            raise MissingPrerequisiteError("PCD model is not calibrated")


def trial_seed(master_seed, hypothesis, experiment, purpose, axis_idx, trial):
    """Seed sequence for one Monte Carlo trial."""
    stream = "eval-h0" if hypothesis == H0 else "eval-h1"
    return substream(master_seed, stream, EXP_CODES[experiment], purpose, axis_idx, trial)


def _limit_worker_threads():
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(1)
    except Exception:
        pass


def _trial_chunk(args):
    """Worker: sequences for a contiguous block of trial indices -> statistics."""
    (ds, synth_cfg, scen_kwargs, seeds, pcd_model, gnn_model, detectors, want_graph) = args
    _limit_worker_threads()
    gsd_stats = np.empty(len(seeds)) if want_graph else None
    counts = {d.algorithm: np.empty(len(seeds), dtype=int) for d in detectors}
    for i, seed in enumerate(seeds):
        cfg = ScenarioConfig(seed=seed, **scen_kwargs)
        seq = gen_sequence(ds, cfg, synth_cfg)
        if want_graph:
            graph = build_graph(seq, pcd_model)
            gsd_stats[i] = gnn_mod.gnn_forward(gnn_model, graph)
        for det in detectors:
            counts[det.algorithm][i] = bl.cluster_count(det, seq)
    return gsd_stats, counts


def _map_chunks(worker, chunks, workers):
    if workers <= 1 or len(chunks) <= 1:
        return [worker(c) for c in chunks]
    import multiprocessing as mp

    ctx = mp.get_context("spawn")
    with ctx.Pool(processes=min(workers, len(chunks))) as pool:
        return pool.map(worker, chunks)


def detector_statistics(
    ds: FingerprintDataset,
    synth_cfg: SynthConfig,
    exp_cfg: ExperimentConfig,
    bank: DetectorBank,
    master_seed: int,
    hypothesis: str,
    experiment: str,
    purpose: int,
    axis_idx: int = 0,
    num_frames: int | None = None,
    speed: float | None = None,
    pcd_threshold: float | None = None,
) -> dict[str, np.ndarray]:
    """Per-detector statistics over fresh trials of one hypothesis.

    Returns {"gsd": float array, <algorithm>: int array}. ``pcd_threshold``
    overrides the stored edge threshold (sample-count sweeps recalibrate it).
    """
    bank.require_trained()
    n = exp_cfg.trials_per_hypothesis
    scen_kwargs = {
        "num_frames": exp_cfg.num_frames if num_frames is None else int(num_frames),
        "frame_rate": exp_cfg.frame_rate,
        "speed": exp_cfg.speed if speed is None else float(speed),
        "hypothesis": hypothesis,
    }
    seeds = [trial_seed(master_seed, hypothesis, experiment, purpose, axis_idx, t) for t in range(n)]
    pcd_model = bank.pcd if pcd_threshold is None else replace(bank.pcd, threshold=pcd_threshold)

    workers = exp_cfg.resolved_workers()
    n_chunks = min(workers, n) if workers > 1 else 1
    bounds = np.linspace(0, n, n_chunks + 1, dtype=int)
    chunks = [
        (ds, synth_cfg, scen_kwargs, seeds[a:b], pcd_model, bank.gnn, bank.detectors, True)
        for a, b in zip(bounds, bounds[1:])
        if b > a
    ]
    results = _map_chunks(_trial_chunk, chunks, workers)
    out = {GSD: np.concatenate([r[0] for r in results])}
    for det in bank.detectors:
        out[det.algorithm] = np.concatenate([r[1][det.algorithm] for r in results])
    return out


@dataclass
class RocCurve:
    """Empirical (pfa, pd) pairs sorted by pfa, with trapezoidal AUC."""

    points: list
    auc: float

    def __post_init__(self):
        for pfa, pd in self.points:
            if not (0 <= pfa <= 1 and 0 <= pd <= 1):
                raise ConfigError("ROC points must lie in the unit square")
        if not 0 <= self.auc <= 1 + 1e-12:
            raise ConfigError("AUC must lie in [0, 1]")


def roc_from_stats(h0_stats, h1_stats) -> RocCurve:
    """Sweep every observed statistic value as a threshold."""
    h0 = np.asarray(h0_stats, dtype=float)
    h1 = np.asarray(h1_stats, dtype=float)
    if h0.size == 0 or h1.size == 0:
        raise ConfigError("need statistics under both hypotheses")
    points = [(1.0, 1.0)]  # threshold below every observed value
    for t in np.unique(np.concatenate([h0, h1])):
        points.append((float(np.mean(h0 > t)), float(np.mean(h1 > t))))
    points.sort()
    pfa = np.array([p for p, _ in points])
    pd = np.array([d for _, d in points])
    return RocCurve(points=points, auc=float(np.trapezoid(pd, pfa)))


def threshold_at_pfa(h0_stats, target_pfa: float) -> float:
    """Smallest observed threshold whose empirical false-alarm rate <= target."""
    if not (0 < target_pfa < 1):
        raise ConfigError("target_pfa must be in (0, 1)")
    stats = np.sort(np.asarray(h0_stats, dtype=float))
    n = len(stats)
    if n == 0:
        raise ConfigError("no calibration statistics")
    k = int(np.ceil((1.0 - target_pfa) * n))
    k = min(max(k, 1), n)
    return float(stats[k - 1])


def wilson_interval(successes: int, n: int, z: float = 1.96):
    """95% binomial confidence interval for a proportion."""
    if n <= 0:
        raise ConfigError("n must be positive")
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _detector_threshold(name, cal_stats, target_pfa):
    if name == GSD:
        return threshold_at_pfa(cal_stats, target_pfa)
    return float(bl.threshold_from_counts(cal_stats, target_pfa))


@dataclass
class RocRunResult:
    curves: dict
    thresholds: dict      # decision threshold per detector at the target pfa
    pd_at_target: dict
    h0_stats: dict
    h1_stats: dict


def run_roc_bundle(ds, synth_cfg, exp_cfg, bank, master_seed) -> RocRunResult:
    """ROC curves for all detectors on one shared set of scoring trials.

    The GSD decision threshold comes from the scoring H0 statistics (the
    ROC itself); baseline thresholds are calibrated on an independent set
    of H0 calibration trials, matching their deployment recipe.
    """
    score_kwargs = dict(experiment="roc", purpose=PURPOSE_SCORE, axis_idx=0)
    h0 = detector_statistics(ds, synth_cfg, exp_cfg, bank, master_seed, H0, **score_kwargs)
    h1 = detector_statistics(ds, synth_cfg, exp_cfg, bank, master_seed, H1, **score_kwargs)
    cal = detector_statistics(
        ds, synth_cfg, exp_cfg, bank, master_seed, H0,
        experiment="roc", purpose=PURPOSE_CAL, axis_idx=0,
    )
    curves, thresholds, pd_at = {}, {}, {}
    for name in bank.names():
        curves[name] = roc_from_stats(h0[name], h1[name])
        cal_stats = h0[name] if name == GSD else cal[name]
        thresholds[name] = _detector_threshold(name, cal_stats, exp_cfg.target_pfa)
        pd_at[name] = float(np.mean(h1[name] > thresholds[name]))
    return RocRunResult(curves=curves, thresholds=thresholds, pd_at_target=pd_at, h0_stats=h0, h1_stats=h1)


def run_roc(source: str, ds, synth_cfg, exp_cfg, bank, master_seed) -> RocCurve:
    """ROC curve for one statistic source ("gsd" or a baseline name)."""
    result = run_roc_bundle(ds, synth_cfg, exp_cfg, bank, master_seed)
    if source not in result.curves:
        raise ConfigError(f"unknown detector {source!r}; have {sorted(result.curves)}")
    return result.curves[source]


def _axis_grid(axis: str, exp_cfg: ExperimentConfig):
    if axis == "speed":
        return [float(v) for v in exp_cfg.speed_grid]
    if axis == "num_frames":
        return [int(v) for v in exp_cfg.frames_grid]
    if axis == "num_samples":
        return [int(v) for v in exp_cfg.samples_grid]
    raise ConfigError(f"unknown sweep axis {axis!r}; have {AXES}")


def _recalibrated_pcd_threshold(ds, synth_cfg, bank, master_seed, experiment, axis_idx, n_samples):
    """Edge threshold for a swept sample count: fresh same-pair quantile.

    The per-frame sample count is a receiver parameter, so the edge decision
    is recalibrated to keep the same-location false-alarm rate at its target
    when the sweep changes it.
    """
    seed = substream(master_seed, "pcd-cal", EXP_CODES[experiment], axis_idx)
    cal_synth = replace(synth_cfg, samples_per_frame=int(n_samples))
    pairs = pcd_mod.build_pair_dataset(ds, cal_synth, 2000, "val", seed)
    return pcd_mod.calibrate_pcd_threshold(bank.pcd, pairs, bank.pcd_target_same_fa)


@dataclass
class SweepPoint:
    axis_value: float
    detector: str
    pd: float
    ci_low: float
    ci_high: float
    threshold: float


def run_pd_sweep(axis: str, ds, synth_cfg, exp_cfg, bank, master_seed):
    """Detection probability at the target pfa along one axis.

    Thresholds are re-calibrated per axis point on independent H0 trials.
    Returns (rows sorted by (axis value, detector), skipped axis values).
    """
    grid = _axis_grid(axis, exp_cfg)
    experiment = {"speed": "speed", "num_frames": "frames", "num_samples": "samples"}[axis]
    rows, skipped = [], []
    n = exp_cfg.trials_per_hypothesis
    for idx, value in enumerate(grid):
        overrides = {}
        point_synth = synth_cfg
        pcd_threshold = None
        if axis == "speed":
            overrides["speed"] = float(value)
        elif axis == "num_frames":
            overrides["num_frames"] = int(value)
        else:
            point_synth = replace(synth_cfg, samples_per_frame=int(value))
            pcd_threshold = _recalibrated_pcd_threshold(
                ds, synth_cfg, bank, master_seed, experiment, idx, value
            )
        try:
            cal = detector_statistics(
                ds, point_synth, exp_cfg, bank, master_seed, H0,
                experiment=experiment, purpose=PURPOSE_CAL, axis_idx=idx,
                pcd_threshold=pcd_threshold, **overrides,
            )
            h1 = detector_statistics(
                ds, point_synth, exp_cfg, bank, master_seed, H1,
                experiment=experiment, purpose=PURPOSE_SCORE, axis_idx=idx,
                pcd_threshold=pcd_threshold, **overrides,
            )
        except InfeasibleScenarioError:
            skipped.append(value)
            continue
        for name in bank.names():
            tau = _detector_threshold(name, cal[name], exp_cfg.target_pfa)
            detections = int(np.sum(h1[name] > tau))
            lo, hi = wilson_interval(detections, n)
            rows.append(
                SweepPoint(
                    axis_value=float(value),
                    detector=name,
                    pd=detections / n,
                    ci_low=lo,
                    ci_high=hi,
                    threshold=float(tau),
                )
            )
    rows.sort(key=lambda r: (r.axis_value, r.detector))
    return rows, skipped


def build_gnn_corpus(ds, synth_cfg, exp_cfg, pcd_model, master_seed):
    """Labeled detection graphs for GNN training and validation.

    Balanced hypotheses; each scenario's speed is drawn uniformly from the
    sweep grid so the classifier is exercised across the evaluation axes.
    """
    if pcd_model.threshold is None:
        raise MissingPrerequisiteError("PCD model is not calibrated")
    total = exp_cfg.gnn_train_graphs + exp_cfg.gnn_val_graphs
    workers = exp_cfg.resolved_workers()

    def make_args(indices):
        return (ds, synth_cfg, exp_cfg, pcd_model, master_seed, indices)

    n_chunks = min(workers, total) if workers > 1 else 1
    bounds = np.linspace(0, total, n_chunks + 1, dtype=int)
    chunks = [make_args(list(range(a, b))) for a, b in zip(bounds, bounds[1:]) if b > a]
    results = _map_chunks(_corpus_chunk, chunks, workers)
    labeled = [item for chunk in results for item in chunk]
    return labeled[: exp_cfg.gnn_train_graphs], labeled[exp_cfg.gnn_train_graphs :]


def _corpus_chunk(args):
    ds, synth_cfg, exp_cfg, pcd_model, master_seed, indices = args
    _limit_worker_threads()
    out = []
    for i in indices:
        hypothesis = H0 if i % 2 == 0 else H1
        root = substream(master_seed, "gnn-data", i)
        speed_ss, scen_ss = root.spawn(2)
        speed = float(np.random.default_rng(speed_ss).choice(exp_cfg.speed_grid))
        cfg = ScenarioConfig(
            num_frames=exp_cfg.num_frames,
            frame_rate=exp_cfg.frame_rate,
            speed=speed,
            hypothesis=hypothesis,
            seed=scen_ss,
        )
        seq = gen_sequence(ds, cfg, synth_cfg)
        graph = build_graph(seq, pcd_model)
        out.append((graph, 0 if hypothesis == H0 else 1))
    return out


def _fmt(x) -> str:
    return repr(float(x))


def write_roc_csv(path, curve: RocCurve) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("pfa,pd\n")
        for pfa, pd in curve.points:
            fh.write(f"{_fmt(pfa)},{_fmt(pd)}\n")


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("axis,detector,pd,ci_low,ci_high\n")
        for r in rows:
            fh.write(
                f"{_fmt(r.axis_value)},{r.detector},{_fmt(r.pd)},{_fmt(r.ci_low)},{_fmt(r.ci_high)}\n"
            )


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
