"""Command-line entry point.

Subcommands: ``ingest``, ``train pcd``, ``train gnn``,
``evaluate {roc,speed,frames,samples}`` and ``inspect graph <scenario-seed>``.
All behavior is driven by one JSON config file with per-command sections;
any value can be overridden with flags of the form ``--section.key=value``.
Exit codes: 0 success, 2 configuration/input error, 3 missing prerequisite,
4 runtime numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

from . import baselines as bl
from . import evaluation as ev
from . import gnn as gnn_mod
from . import neural
from . import pcd as pcd_mod
from .errors import (
    ConfigError,
    GsdError,
    InfeasibleScenarioError,
    InsufficientDataError,
    MissingPrerequisiteError,
    NumericalError,
    ParseError,
)
from .ingest import IngestConfig, export_split_csv, load_fingerprints, split_locations
from .seeds import seed_int, substream
from .synth import SynthConfig
from .trajectory import H0, H1, ScenarioConfig, gen_sequence
from .graphgen import build_graph, graph_to_edge_list

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PREREQ = 3
EXIT_NUMERIC = 4

DEFAULT_CONFIG = {
    "dataset_path": "fingerprints.csv",
    "output_dir": "runs/default",
    "master_seed": 7,
    "ingest": {"floor": 1, "num_aps": 5, "test_frac": 0.2, "val_frac": 0.1},
    "synth": {"samples_per_frame": 150, "estimates_per_location": 1000, "noise_floor": 0.0},
    "pcd": {
        "pairs_per_class": 50000,
        "val_pairs_per_class": 10000,
        "target_same_fa": 0.05,
        "epsilon_log": 1e-12,
        "hidden": [512, 512, 512],
        "learning_rate": 1e-3,
        "batch_size": 128,
        "max_epochs": 8,
        "patience": 2,
    },
    "gnn": {
        "hidden": 64,
        "num_layers": 3,
        "learning_rate": 1e-3,
        "batch_size": 32,
        "max_epochs": 40,
        "patience": 5,
    },
    "baselines": {
        "dbscan": dict(bl.DEFAULT_PARAMS["dbscan"]),
        "optics": dict(bl.DEFAULT_PARAMS["optics"]),
        "birch": dict(bl.DEFAULT_PARAMS["birch"]),
    },
    "experiment": {
        "trials_per_hypothesis": 500,
        "frame_rate": 10.0,
        "num_frames": 30,
        "speed": 1.0,
        "target_pfa": 0.1,
        "speed_grid": [0.0, 0.5, 1.0, 2.0, 3.0, 5.0],
        "frames_grid": [10, 20, 30, 40, 50],
        "samples_grid": [25, 50, 100, 150, 250],
        "gnn_train_graphs": 2000,
        "gnn_val_graphs": 500,
        "workers": None,
    },
}


def _deep_merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if key in out and isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _apply_override(config: dict, token: str) -> None:
    if not token.startswith("--") or "=" not in token:
        raise ConfigError(f"cannot parse override {token!r}; expected --section.key=value")
    path, raw = token[2:].split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = config
    parts = path.split(".")
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigError(f"unknown config section {part!r} in override {token!r}")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {path!r} in override {token!r}")
    node[parts[-1]] = value


def load_config(config_path, overrides, workers=None) -> dict:
    config = copy.deepcopy(DEFAULT_CONFIG)
    if config_path is not None:
        path = Path(config_path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            try:
                user = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"config file {path}: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a JSON object")
        config = _deep_merge(config, user)
    for token in overrides:
        _apply_override(config, token)
    if workers is not None:
        config["experiment"]["workers"] = workers
    if config.get("master_seed") is None:
        raise ConfigError("master_seed is mandatory")
    return config


def _dataset(config):
    path = Path(config["dataset_path"])
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    ing = config["ingest"]
    ds = load_fingerprints(path, IngestConfig(floor=int(ing["floor"]), num_aps=int(ing["num_aps"])))
    return split_locations(
        ds,
        test_frac=float(ing["test_frac"]),
        val_frac=float(ing["val_frac"]),
        seed=seed_int(int(config["master_seed"]), "ingest-split"),
    )


def _synth_config(config) -> SynthConfig:
    s = config["synth"]
    return SynthConfig(
        samples_per_frame=int(s["samples_per_frame"]),
        estimates_per_location=int(s["estimates_per_location"]),
        noise_floor=float(s["noise_floor"]),
    )


def _experiment_config(config) -> ev.ExperimentConfig:
    e = config["experiment"]
    workers = e.get("workers")
    return ev.ExperimentConfig(
        trials_per_hypothesis=int(e["trials_per_hypothesis"]),
        frame_rate=float(e["frame_rate"]),
        num_frames=int(e["num_frames"]),
        speed=float(e["speed"]),
        target_pfa=float(e["target_pfa"]),
        speed_grid=tuple(e["speed_grid"]),
        frames_grid=tuple(e["frames_grid"]),
        samples_grid=tuple(e["samples_grid"]),
        gnn_train_graphs=int(e["gnn_train_graphs"]),
        gnn_val_graphs=int(e["gnn_val_graphs"]),
        workers=None if workers is None else int(workers),
    )


def _out_dir(config) -> Path:
    out = Path(config["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _pcd_path(config) -> Path:
    return Path(config["output_dir"]) / "pcd_model.json"


def _gnn_path(config) -> Path:
    return Path(config["output_dir"]) / "gnn_model.json"


def _write_history_csv(path, history) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,train_loss,val_loss\n")
        for row in history:
            fh.write(f"{row['epoch']},{row['train_loss']!r},{row['val_loss']!r}\n")


def cmd_ingest(config) -> int:
    ds = _dataset(config)
    out = _out_dir(config)
    export_split_csv(ds, out / "split_assignment.csv")
    sizes = {name: len(ds.split_ids(name)) for name in ("train", "val", "test")}
    summary = {
        "num_locations": len(ds.locations),
        "selected_aps": ds.selected_aps,
        "split_sizes": sizes,
    }
    with open(out / "ingest_summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"ingested {summary['num_locations']} locations, receivers {ds.selected_aps}")
    print(f"splits: train={sizes['train']} val={sizes['val']} test={sizes['test']}")
    print(f"wrote {out / 'split_assignment.csv'}")
    return EXIT_OK


def _train_config(section, seed) -> neural.TrainConfig:
    return neural.TrainConfig(
        learning_rate=float(section["learning_rate"]),
        batch_size=int(section["batch_size"]),
        max_epochs=int(section["max_epochs"]),
        early_stop_patience=int(section["patience"]),
        seed=seed,
    )


def cmd_train_pcd(config) -> int:
    ds = _dataset(config)
    synth_cfg = _synth_config(config)
    master = int(config["master_seed"])
    p = config["pcd"]
    train_pairs = pcd_mod.build_pair_dataset(
        ds, synth_cfg, int(p["pairs_per_class"]), "train", substream(master, "pcd-data", 0)
    )
    val_pairs = pcd_mod.build_pair_dataset(
        ds, synth_cfg, int(p["val_pairs_per_class"]), "val", substream(master, "pcd-data", 1)
    )
    cfg = _train_config(p, seed_int(master, "pcd-init"))
    model, history = pcd_mod.train_pcd(
        train_pairs, val_pairs, cfg, hidden=tuple(p["hidden"]), epsilon_log=float(p["epsilon_log"])
    )
    accuracy = pcd_mod.pair_accuracy(model, val_pairs, threshold=0.0)
    model.threshold = pcd_mod.calibrate_pcd_threshold(model, val_pairs, float(p["target_same_fa"]))
    out = _out_dir(config)
    pcd_mod.save_pcd(_pcd_path(config), model)
    _write_history_csv(out / "pcd_loss_history.csv", history)
    best_val = min((h["val_loss"] for h in history), default=float("nan"))
    gate = "PASS" if accuracy >= 0.90 else "FAIL"
    print(f"pcd_val_accuracy={accuracy:.4f} (gate >= 0.90: {gate})")
    print(f"pcd_best_val_loss={best_val:.6f} epochs={len(history)}")
    print(f"pcd_threshold={model.threshold!r} (same-pair fa target {p['target_same_fa']})")
    print(f"wrote {_pcd_path(config)}")
    return EXIT_OK


def cmd_train_gnn(config) -> int:
    if not _pcd_path(config).exists():
        raise MissingPrerequisiteError(
            f"PCD model not found at {_pcd_path(config)}; run `gsd train pcd` first"
        )
    pcd_model = pcd_mod.load_pcd(_pcd_path(config))
    ds = _dataset(config)
    synth_cfg = _synth_config(config)
    exp_cfg = _experiment_config(config)
    master = int(config["master_seed"])
    g = config["gnn"]
    train_graphs, val_graphs = ev.build_gnn_corpus(ds, synth_cfg, exp_cfg, pcd_model, master)
    cfg = _train_config(g, seed_int(master, "gnn-init"))
    model, history = gnn_mod.train_gnn(
        train_graphs, val_graphs, cfg, hidden=int(g["hidden"]), num_layers=int(g["num_layers"])
    )
    out = _out_dir(config)
    gnn_mod.save_gnn(_gnn_path(config), model)
    _write_history_csv(out / "gnn_loss_history.csv", history)
    best_val = min((h["val_loss"] for h in history), default=float("nan"))
    print(f"gnn_best_val_loss={best_val:.6f} epochs={len(history)}")
    print(f"corpus: {len(train_graphs)} train / {len(val_graphs)} val graphs")
    print(f"wrote {_gnn_path(config)}")
    return EXIT_OK


def _bank(config) -> ev.DetectorBank:
    for path, hint in ((_pcd_path(config), "train pcd"), (_gnn_path(config), "train gnn")):
        if not path.exists():
            raise MissingPrerequisiteError(f"model not found at {path}; run `gsd {hint}` first")
    detectors = bl.default_detectors(config["baselines"])
    return ev.DetectorBank(
        pcd=pcd_mod.load_pcd(_pcd_path(config)),
        gnn=gnn_mod.load_gnn(_gnn_path(config)),
        detectors=detectors,
        pcd_target_same_fa=float(config["pcd"]["target_same_fa"]),
    )


def _manifest_base(config, experiment) -> dict:
    return {
        "command": "evaluate",
        "experiment": experiment,
        "master_seed": int(config["master_seed"]),
        "config": config,
        "model_hashes": {
            "pcd": ev.sha256_file(_pcd_path(config)),
            "gnn": ev.sha256_file(_gnn_path(config)),
        },
    }


def cmd_evaluate(config, experiment) -> int:
    bank = _bank(config)
    ds = _dataset(config)
    synth_cfg = _synth_config(config)
    exp_cfg = _experiment_config(config)
    master = int(config["master_seed"])
    out = _out_dir(config)
    manifest = _manifest_base(config, experiment)
    artifacts = {}

    if experiment == "roc":
        result = ev.run_roc_bundle(ds, synth_cfg, exp_cfg, bank, master)
        for name, curve in sorted(result.curves.items()):
            fname = f"roc_{name}.csv"
            ev.write_roc_csv(out / fname, curve)
            artifacts[fname] = ev.sha256_file(out / fname)
            print(f"{name}: auc={curve.auc:.4f} pd@pfa{exp_cfg.target_pfa}={result.pd_at_target[name]:.4f}")
        manifest["auc"] = {k: v.auc for k, v in result.curves.items()}
        manifest["thresholds"] = result.thresholds
        manifest["pd_at_target"] = result.pd_at_target
    else:
        axis = {"speed": "speed", "frames": "num_frames", "samples": "num_samples"}[experiment]
        rows, skipped = ev.run_pd_sweep(axis, ds, synth_cfg, exp_cfg, bank, master)
        fname = f"pd_vs_{axis}.csv"
        ev.write_sweep_csv(out / fname, rows)
        artifacts[fname] = ev.sha256_file(out / fname)
        manifest["skipped_points"] = skipped
        for value in skipped:
            print(f"warning: axis point {value} infeasible, skipped")
        for r in rows:
            print(f"{axis}={r.axis_value} {r.detector}: pd={r.pd:.4f} [{r.ci_low:.4f}, {r.ci_high:.4f}]")

    manifest["artifacts"] = artifacts
    ev.write_manifest(out / f"manifest_{experiment}.json", manifest)
    print(f"wrote {sorted(artifacts)} and manifest_{experiment}.json to {out}")
    return EXIT_OK


def cmd_inspect_graph(config, scenario_seed, hypothesis) -> int:
    if not _pcd_path(config).exists():
        raise MissingPrerequisiteError(
            f"PCD model not found at {_pcd_path(config)}; run `gsd train pcd` first"
        )
    pcd_model = pcd_mod.load_pcd(_pcd_path(config))
    ds = _dataset(config)
    exp_cfg = _experiment_config(config)
    scen = ScenarioConfig(
        num_frames=exp_cfg.num_frames,
        frame_rate=exp_cfg.frame_rate,
        speed=exp_cfg.speed,
        hypothesis=hypothesis,
        seed=int(scenario_seed),
    )
    seq = gen_sequence(ds, scen, _synth_config(config))
    graph = build_graph(seq, pcd_model)
    sys.stdout.write(graph_to_edge_list(graph))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsd",
        description="RSS spoofing detection: train detectors and run Monte Carlo experiments",
    )
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--workers", type=int, default=None, help="evaluation parallelism cap")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("ingest", help="load the survey, select receivers, write splits")

    p_train = sub.add_parser("train", help="train a detector stage")
    p_train.add_argument("stage", choices=["pcd", "gnn"])

    p_eval = sub.add_parser("evaluate", help="run a Monte Carlo experiment")
    p_eval.add_argument("experiment", choices=list(ev.EXPERIMENTS))

    p_inspect = sub.add_parser("inspect", help="inspection helpers")
    p_inspect.add_argument("kind", choices=["graph"])
    p_inspect.add_argument("scenario_seed", type=int)
    p_inspect.add_argument("--hypothesis", choices=[H0, H1], default=H1)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, unknown = parser.parse_known_args(argv)
    try:
        config = load_config(args.config, unknown, workers=args.workers)
        if args.command == "ingest":
            return cmd_ingest(config)
        if args.command == "train":
            return cmd_train_pcd(config) if args.stage == "pcd" else cmd_train_gnn(config)
        if args.command == "evaluate":
            return cmd_evaluate(config, args.experiment)
        if args.command == "inspect":
            return cmd_inspect_graph(config, args.scenario_seed, args.hypothesis)
        parser.error(f"unknown command {args.command!r}")
    except MissingPrerequisiteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PREREQ
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, ConfigError, InsufficientDataError, InfeasibleScenarioError, GsdError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
