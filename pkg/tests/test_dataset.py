import json

import numpy as np
import pytest

from orientkit.angles import DomainError
from orientkit.dataset import (
    DatasetConfig,
    generate_dataset,
    load_manifest,
    manifest_digest,
    sample_view,
    split_of,
)
from orientkit.render import read_ppm

MANIFEST_KEYS = {"object_id", "view", "file", "polar", "azimuth", "rotation", "has_front", "split"}


def test_counts_and_ranges(tmp_path):
    cfg = DatasetConfig(n_objects=2, views_per_object=3, width=16, height=16, seed=5)
    recs = generate_dataset(cfg, tmp_path)
    assert len(recs) == 6
    lines = (tmp_path / "manifest.jsonl").read_text().splitlines()
    assert len(lines) == 6
    for line in lines:
        d = json.loads(line)
        assert set(d) == MANIFEST_KEYS
        if d["has_front"]:
            assert 0 <= d["azimuth"] < 360 and 30 <= d["polar"] <= 150
        else:
            assert d["azimuth"] is None
        assert read_ppm(tmp_path / d["file"]).shape == (16, 16, 3)


def test_same_seed_identical_bytes(tmp_path):
    cfg = DatasetConfig(n_objects=3, views_per_object=2, width=16, height=16, seed=9)
    generate_dataset(cfg, tmp_path / "a")
    generate_dataset(cfg, tmp_path / "b")
    assert manifest_digest(tmp_path / "a" / "manifest.jsonl") == manifest_digest(tmp_path / "b" / "manifest.jsonl")
    for f in sorted((tmp_path / "a" / "images").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / "images" / f.name).read_bytes()


def test_different_seed_differs(tmp_path):
    a = sample_view(DatasetConfig(seed=1), 0, 0)
    b = sample_view(DatasetConfig(seed=2), 0, 0)
    assert a != b


def test_views_independent_of_dataset_size():
    small = DatasetConfig(n_objects=3, views_per_object=2, seed=4)
    big = DatasetConfig(n_objects=30, views_per_object=40, seed=4)
    assert sample_view(small, 1, 1) == sample_view(big, 1, 1)


def test_object_split_uses_last_ids():
    cfg = DatasetConfig(n_objects=20, views_per_object=4, val_fraction=0.1)
    assert [split_of(cfg, o, 0) for o in range(20)].count("val") == 2
    assert split_of(cfg, 19, 0) == "val" and split_of(cfg, 0, 0) == "train"


def test_view_split_holds_out_views_of_every_object():
    cfg = DatasetConfig(n_objects=4, views_per_object=10, val_fraction=0.2, split_mode="view")
    for o in range(4):
        assert [split_of(cfg, o, v) for v in range(10)].count("val") == 2


def test_config_validation():
    with pytest.raises(DomainError):
        DatasetConfig(n_objects=0).validate()
    with pytest.raises(DomainError):
        DatasetConfig(theta_range=(100, 20)).validate()


def test_round_trip_through_manifest(tiny_dataset):
    root, cfg, recs = tiny_dataset
    loaded = load_manifest(root)
    assert [r.to_json() for r in loaded] == [r.to_json() for r in recs]


def test_malformed_manifest_names_line(tmp_path):
    good = {"object_id": 0, "view": 0, "file": "x.ppm", "polar": 90, "azimuth": 0, "rotation": 0, "has_front": True, "split": "train"}
    (tmp_path / "manifest.jsonl").write_text(json.dumps(good) + "\n{oops\n")
    with pytest.raises(ValueError, match=":2:"):
        load_manifest(tmp_path)


def test_no_front_fraction_extremes(tmp_path):
    recs = generate_dataset(DatasetConfig(n_objects=3, views_per_object=1, width=8, height=8, no_front_fraction=1.0), tmp_path)
    assert not any(r.orientation.has_front for r in recs)
    img = read_ppm(tmp_path / recs[0].file)
    assert not np.all(img == 0)
