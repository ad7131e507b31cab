"""Synthetic crowdsourced-fingerprint CSV generator.

Produces a multi-floor WiFi RSS survey in the loader's CSV format, shaped
like the public indoor datasets this pipeline targets: a few hundred
locations per floor, hundreds of access points of which each location
hears only a handful, and five full-coverage "backbone" APs per floor so
that top-coverage AP selection retains every location on the floor.

True RSS per (location, AP) follows log-distance path loss plus i.i.d.
log-normal shadowing, which gives the spatially rough RSS field typical
of multipath-dominated indoor environments.

Usage: ``python -m gsd.simdata out.csv [--seed N] [--scale small|full]``.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SimDataConfig:
    seed: int = 0
    locations_per_floor: tuple = (648, 1399, 1400, 1399)
    num_aps: int = 992
    backbone_per_floor: int = 5
    area: tuple = (60.0, 25.0)          # meters
    sparse_radius: float = 10.0          # hearing radius of non-backbone APs
    tx_power_dbm: float = 18.0
    backbone_tx_power_dbm: float = 30.0
    ref_loss_db: float = 40.0            # loss at 1 m
    path_loss_exp: float = 3.0
    shadowing_std_db: float = 8.0
    sensitivity_dbm: float = -95.0


def small_config(seed: int = 0) -> SimDataConfig:
    """Reduced single-floor variant for quick tests."""
    return SimDataConfig(
        seed=seed,
        locations_per_floor=(60,),
        num_aps=24,
        backbone_per_floor=3,
        area=(30.0, 15.0),
        sparse_radius=8.0,
    )


def _rx_dbm(tx_dbm, dist, cfg, shadow):
    d = np.maximum(dist, 1.0)
    return tx_dbm - cfg.ref_loss_db - 10.0 * cfg.path_loss_exp * np.log10(d) + shadow


def generate_rows(cfg: SimDataConfig):
    """Yield (location_id, x, y, floor, ap_id, rss_dbm) tuples."""
    rng = np.random.default_rng(cfg.seed)
    w, h = cfg.area
    floors = list(range(1, len(cfg.locations_per_floor) + 1))

    ap_ids = rng.permutation(np.arange(1, cfg.num_aps + 1))
    n_backbone = cfg.backbone_per_floor * len(floors)
    if n_backbone >= cfg.num_aps:
        raise ValueError("num_aps must exceed total backbone count")
    backbone_ids = ap_ids[:n_backbone].reshape(len(floors), cfg.backbone_per_floor)
    sparse_ids = np.sort(ap_ids[n_backbone:])
    sparse_floor = rng.integers(0, len(floors), size=sparse_ids.size)
    sparse_xy = np.column_stack([rng.uniform(0, w, sparse_ids.size), rng.uniform(0, h, sparse_ids.size)])
    backbone_xy = rng.uniform(0, 1, size=(len(floors), cfg.backbone_per_floor, 2)) * np.array([w, h])

    next_loc_id = 1
    for fi, floor in enumerate(floors):
        n_loc = cfg.locations_per_floor[fi]
        xy = np.column_stack([rng.uniform(0, w, n_loc), rng.uniform(0, h, n_loc)])
        loc_ids = np.arange(next_loc_id, next_loc_id + n_loc)
        next_loc_id += n_loc

        # backbone APs: heard at every location on their floor
        bb = np.sort(backbone_ids[fi])
        for j, ap in enumerate(bb):
            ap_pos = backbone_xy[fi, j]
            dist = np.hypot(xy[:, 0] - ap_pos[0], xy[:, 1] - ap_pos[1])
            shadow = rng.normal(0.0, cfg.shadowing_std_db, n_loc)
            rss = _rx_dbm(cfg.backbone_tx_power_dbm, dist, cfg, shadow)
            for k in range(n_loc):
                yield (int(loc_ids[k]), float(xy[k, 0]), float(xy[k, 1]), floor, int(ap), float(rss[k]))

        # sparse APs: heard within radius and above sensitivity only
        on_floor = sparse_ids[sparse_floor == fi]
        pos = sparse_xy[sparse_floor == fi]
        for j, ap in enumerate(on_floor):
            dist = np.hypot(xy[:, 0] - pos[j, 0], xy[:, 1] - pos[j, 1])
            hear = dist <= cfg.sparse_radius
            if not np.any(hear):
                continue
            shadow = rng.normal(0.0, cfg.shadowing_std_db, int(hear.sum()))
            rss = _rx_dbm(cfg.tx_power_dbm, dist[hear], cfg, shadow)
            keep = rss >= cfg.sensitivity_dbm
            for k, rv in zip(np.nonzero(hear)[0][keep], rss[keep]):
                yield (int(loc_ids[k]), float(xy[k, 0]), float(xy[k, 1]), floor, int(ap), float(rv))


def generate_fingerprint_csv(path, cfg: SimDataConfig) -> int:
    """Write the survey CSV; returns the number of data rows."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("location_id,x,y,floor,ap_id,rss_dbm\n")
        for loc_id, x, y, floor, ap_id, rss in generate_rows(cfg):
            fh.write(f"{loc_id},{x!r},{y!r},{floor},{ap_id},{rss:.2f}\n")
            count += 1
    return count


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Generate a synthetic fingerprint survey CSV")
    parser.add_argument("out", help="output CSV path")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--scale", choices=["small", "full"], default="full")
    args = parser.parse_args(argv)
    cfg = SimDataConfig(seed=args.seed) if args.scale == "full" else small_config(args.seed)
    n = generate_fingerprint_csv(args.out, cfg)
    print(f"wrote {n} rows to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
