"""Fingerprint dataset loading, receiver selection and location splits.

Input format: UTF-8 CSV with header ``location_id,x,y,floor,ap_id,rss_dbm``,
one row per (location, access point) observation. dBm is the on-disk unit;
watts are the in-memory unit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, InsufficientDataError, ParseError

HEADER = ["location_id", "x", "y", "floor", "ap_id", "rss_dbm"]
SPLIT_NAMES = ("train", "val", "test")

MIN_LOCATIONS = 10


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(watts):
    return 10.0 * np.log10(np.asarray(watts, dtype=float)) + 30.0


@dataclass(frozen=True)
class IngestConfig:
    """Floor filter and number of receivers M to retain."""

    floor: int = 1
    num_aps: int = 5

    def __post_init__(self):
        if self.num_aps < 1:
            raise ConfigError("num_aps must be >= 1")


@dataclass(frozen=True)
class MeasurementLocation:
    id: int
    xy: np.ndarray        # (2,) meters
    true_rss: np.ndarray  # (M,) watts, ordered like selected_aps


@dataclass
class FingerprintDataset:
    """Ground-truth RSS per location for the M selected receivers.

    ``split`` maps location id -> "train"/"val"/"test"; empty until
    :func:`split_locations` has run. Read-only after construction.
    """

    locations: list[MeasurementLocation]
    selected_aps: list[int]
    split: dict[int, str] = field(default_factory=dict)

    @property
    def num_receivers(self) -> int:
        return len(self.selected_aps)

    def ids(self) -> list[int]:
        return [loc.id for loc in self.locations]

    def by_id(self, location_id: int) -> MeasurementLocation:
        return self._index()[location_id]

    def _index(self):
        idx = getattr(self, "_id_index", None)
        if idx is None:
            idx = {loc.id: loc for loc in self.locations}
            object.__setattr__(self, "_id_index", idx)
        return idx

    def split_ids(self, name: str) -> list[int]:
        if name not in SPLIT_NAMES:
            raise ConfigError(f"unknown split {name!r}")
        if not self.split:
            raise ConfigError("dataset has no split assignment yet")
        return [loc.id for loc in self.locations if self.split[loc.id] == name]

    def split_arrays(self, name: str):
        """(ids, coords (D,2), rss (D,M)) for one split, in id order."""
        ids = self.split_ids(name)
        index = self._index()
        coords = np.array([index[i].xy for i in ids], dtype=float)
        rss = np.array([index[i].true_rss for i in ids], dtype=float)
        return np.array(ids, dtype=int), coords, rss


def _parse_rows(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1)
        if [h.strip() for h in header] != HEADER:
            raise ParseError(f"expected header {','.join(HEADER)}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 6:
                raise ParseError(f"expected 6 fields, got {len(row)}", line=lineno)
            try:
                loc_id = int(row[0])
                x = float(row[1])
                y = float(row[2])
                floor = int(row[3])
                ap_id = int(row[4])
                rss_dbm = float(row[5])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if not (np.isfinite(x) and np.isfinite(y) and np.isfinite(rss_dbm)):
                raise ParseError("non-finite numeric field", line=lineno)
            rows.append((lineno, loc_id, x, y, floor, ap_id, rss_dbm))
    return rows


def load_fingerprints(path, config: IngestConfig) -> FingerprintDataset:
    """Load a fingerprint CSV restricted to one floor.

    Selects the ``config.num_aps`` access points observed at the greatest
    number of the floor's locations (ties broken by lower ap_id), drops
    locations missing any selected AP, and converts dBm to watts.
    """
    rows = _parse_rows(path)

    coords = {}      # loc_id -> (x, y, floor)
    readings = {}    # loc_id -> {ap_id: rss_dbm}
    for lineno, loc_id, x, y, floor, ap_id, rss_dbm in rows:
        if floor != config.floor:
            # still validate location consistency across floors
            prev = coords.get(loc_id)
            if prev is not None and prev != (x, y, floor):
                raise ParseError(f"location {loc_id} has inconsistent coordinates", line=lineno)
            coords.setdefault(loc_id, (x, y, floor))
            continue
        prev = coords.get(loc_id)
        if prev is None:
            coords[loc_id] = (x, y, floor)
        elif prev != (x, y, floor):
            raise ParseError(f"location {loc_id} has inconsistent coordinates", line=lineno)
        per_loc = readings.setdefault(loc_id, {})
        if ap_id in per_loc:
            raise ParseError(f"duplicate reading for location {loc_id}, ap {ap_id}", line=lineno)
        per_loc[ap_id] = rss_dbm

    # AP coverage over the floor's locations; deterministic w.r.t. row order.
    coverage = {}
    for per_loc in readings.values():
        for ap_id in per_loc:
            coverage[ap_id] = coverage.get(ap_id, 0) + 1
    if len(coverage) < config.num_aps:
        raise ConfigError(
            f"only {len(coverage)} access points observable on floor "
            f"{config.floor}, need {config.num_aps}"
        )
    ranked = sorted(coverage.items(), key=lambda kv: (-kv[1], kv[0]))
    selected = [ap_id for ap_id, _ in ranked[: config.num_aps]]

    locations = []
    for loc_id in sorted(readings):
        per_loc = readings[loc_id]
        if any(ap not in per_loc for ap in selected):
            continue
        x, y, _ = coords[loc_id]
        rss_w = dbm_to_watts(np.array([per_loc[ap] for ap in selected], dtype=float))
        locations.append(MeasurementLocation(id=loc_id, xy=np.array([x, y]), true_rss=rss_w))

    if len(locations) < MIN_LOCATIONS:
        raise InsufficientDataError(
            f"only {len(locations)} locations retain all {config.num_aps} "
            f"selected access points (need >= {MIN_LOCATIONS})"
        )

    seen = {}
    for loc in locations:
        key = (loc.xy[0], loc.xy[1])
        if key in seen:
            raise ParseError(f"locations {seen[key]} and {loc.id} share coordinates {key}")
        seen[key] = loc.id

    return FingerprintDataset(locations=locations, selected_aps=selected)


def split_locations(ds: FingerprintDataset, test_frac: float, val_frac: float, seed: int) -> FingerprintDataset:
    """Assign each location to train/val/test, deterministically in the seed."""
    if not (test_frac >= 0 and val_frac >= 0 and 0 < test_frac + val_frac < 1):
        raise ConfigError("need 0 < test_frac + val_frac < 1 with nonnegative fractions")
    ids = sorted(ds.ids())
    n = len(ids)
    n_test = int(round(test_frac * n))
    n_val = int(round(val_frac * n))
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    assignment = {}
    for rank, idx in enumerate(order):
        if rank < n_test:
            assignment[ids[idx]] = "test"
        elif rank < n_test + n_val:
            assignment[ids[idx]] = "val"
        else:
            assignment[ids[idx]] = "train"
    return replace(ds, split=assignment)


def export_split_csv(ds: FingerprintDataset, path) -> None:
    """Write the split assignment as ``location_id,split`` for audit."""
    if not ds.split:
        raise ConfigError("dataset has no split assignment yet")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("location_id,split\n")
        for loc_id in sorted(ds.split):
            fh.write(f"{loc_id},{ds.split[loc_id]}\n")
