"""Loader, AP selection, unit conversion and split behavior."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gsd.errors import ConfigError, InsufficientDataError, ParseError
from gsd.ingest import (
    IngestConfig,
    dbm_to_watts,
    export_split_csv,
    load_fingerprints,
    split_locations,
    watts_to_dbm,
)

HEADER = "location_id,x,y,floor,ap_id,rss_dbm\n"


def write_csv(path, rows):
    path.write_text(HEADER + "".join(rows), encoding="utf-8")
    return path


def grid_rows(num_locations, ap_ids, floor=1):
    rows = []
    for i in range(num_locations):
        for ap in ap_ids:
            rows.append(f"{i + 1},{float(i)},{float(i % 7)},{floor},{ap},{-50.0 - i - ap}\n")
    return rows


def test_ap_selection_by_coverage(tmp_path):
    # ap 7 at all 3 locations, ap 9 at 2 of them -> M=1 selects 7
    rows = [
        "1,0.0,0.0,1,7,-40\n",
        "2,1.0,0.0,1,7,-41\n",
        "3,2.0,0.0,1,7,-42\n",
        "1,0.0,0.0,1,9,-50\n",
        "2,1.0,0.0,1,9,-51\n",
    ]
    # pad with distinct locations so the 10-location floor minimum is met
    for i in range(4, 14):
        rows.append(f"{i},{float(i)},3.0,1,7,-45\n")
    path = write_csv(tmp_path / "toy.csv", rows)
    ds = load_fingerprints(path, IngestConfig(floor=1, num_aps=1))
    assert ds.selected_aps == [7]
    assert len(ds.locations) == 13


def test_coverage_tie_breaks_to_lower_ap_id(tmp_path):
    rows = grid_rows(12, ap_ids=[5, 3])
    path = write_csv(tmp_path / "tie.csv", rows)
    ds = load_fingerprints(path, IngestConfig(floor=1, num_aps=1))
    assert ds.selected_aps == [3]


def test_locations_missing_selected_ap_are_dropped(tmp_path):
    rows = grid_rows(12, ap_ids=[1])
    rows += [f"{i},{float(i)},5.0,1,2,-60\n" for i in range(100, 103)]  # ap 2 only
    path = write_csv(tmp_path / "drop.csv", rows)
    ds = load_fingerprints(path, IngestConfig(floor=1, num_aps=1))
    assert ds.selected_aps == [1]
    assert all(loc.id <= 12 for loc in ds.locations)


def test_single_location_insufficient(tmp_path):
    path = write_csv(tmp_path / "one.csv", ["1,0.0,0.0,1,7,-40\n"])
    with pytest.raises(InsufficientDataError):
        load_fingerprints(path, IngestConfig(floor=1, num_aps=1))


def test_too_few_aps_is_config_error(tmp_path):
    path = write_csv(tmp_path / "few.csv", grid_rows(12, ap_ids=[1, 2]))
    with pytest.raises(ConfigError):
        load_fingerprints(path, IngestConfig(floor=1, num_aps=5))


def test_malformed_row_names_line(tmp_path):
    rows = grid_rows(12, ap_ids=[1])
    rows[3] = "4,not_a_number,0.0,1,1,-40\n"
    path = write_csv(tmp_path / "bad.csv", rows)
    with pytest.raises(ParseError) as err:
        load_fingerprints(path, IngestConfig(floor=1, num_aps=1))
    assert "line 5" in str(err.value)  # header is line 1


def test_duplicate_reading_rejected(tmp_path):
    rows = grid_rows(12, ap_ids=[1])
    rows.append("1,0.0,0.0,1,1,-40\n")
    path = write_csv(tmp_path / "dup.csv", rows)
    with pytest.raises(ParseError):
        load_fingerprints(path, IngestConfig(floor=1, num_aps=1))


def test_wrong_header_rejected(tmp_path):
    path = tmp_path / "hdr.csv"
    path.write_text("a,b,c\n1,2,3\n", encoding="utf-8")
    with pytest.raises(ParseError):
        load_fingerprints(path, IngestConfig(floor=1, num_aps=1))


def test_dbm_watt_conversion_examples():
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert dbm_to_watts(0.0) == pytest.approx(1e-3)
    assert watts_to_dbm(1e-3) == pytest.approx(0.0)


@given(st.floats(min_value=-120.0, max_value=30.0))
def test_dbm_roundtrip_within_tolerance(dbm):
    assert abs(float(watts_to_dbm(dbm_to_watts(dbm))) - dbm) < 1e-9


def test_reload_is_bit_identical(toy_csv):
    cfg = IngestConfig(floor=1, num_aps=3)
    a = load_fingerprints(toy_csv, cfg)
    b = load_fingerprints(toy_csv, cfg)
    assert a.selected_aps == b.selected_aps
    assert [l.id for l in a.locations] == [l.id for l in b.locations]
    for la, lb in zip(a.locations, b.locations):
        assert np.array_equal(la.true_rss, lb.true_rss)
        assert np.array_equal(la.xy, lb.xy)


def test_row_order_invariance(toy_csv, tmp_path):
    lines = toy_csv.read_text(encoding="utf-8").splitlines(keepends=True)
    header, body = lines[0], lines[1:]
    rng = np.random.default_rng(0)
    shuffled = [body[i] for i in rng.permutation(len(body))]
    other = tmp_path / "shuffled.csv"
    other.write_text(header + "".join(shuffled), encoding="utf-8")
    cfg = IngestConfig(floor=1, num_aps=3)
    a = load_fingerprints(toy_csv, cfg)
    b = load_fingerprints(other, cfg)
    assert a.selected_aps == b.selected_aps
    assert [l.id for l in a.locations] == [l.id for l in b.locations]
    for la, lb in zip(a.locations, b.locations):
        assert np.array_equal(la.true_rss, lb.true_rss)


def test_split_sizes_round(tmp_path):
    path = write_csv(tmp_path / "ten.csv", grid_rows(10, ap_ids=[1]))
    ds = load_fingerprints(path, IngestConfig(floor=1, num_aps=1))
    ds = split_locations(ds, test_frac=0.2, val_frac=0.1, seed=3)
    sizes = {name: len(ds.split_ids(name)) for name in ("train", "val", "test")}
    assert sizes == {"test": 2, "val": 1, "train": 7}


def test_split_deterministic_and_disjoint(toy_dataset):
    from gsd.ingest import split_locations as sl

    a = sl(toy_dataset, 0.2, 0.1, seed=99)
    b = sl(toy_dataset, 0.2, 0.1, seed=99)
    assert a.split == b.split
    parts = [set(a.split_ids(n)) for n in ("train", "val", "test")]
    assert not (parts[0] & parts[1]) and not (parts[0] & parts[2]) and not (parts[1] & parts[2])
    assert parts[0] | parts[1] | parts[2] == set(a.ids())


def test_split_fraction_validation(toy_dataset):
    with pytest.raises(ConfigError):
        split_locations(toy_dataset, 0.8, 0.3, seed=0)
    with pytest.raises(ConfigError):
        split_locations(toy_dataset, -0.1, 0.2, seed=0)


def test_export_split_csv(toy_dataset, tmp_path):
    out = tmp_path / "split.csv"
    export_split_csv(toy_dataset, out)
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "location_id,split"
    assert len(lines) == len(toy_dataset.locations) + 1
    assert all(line.split(",")[1] in ("train", "val", "test") for line in lines[1:])
