"""Object insertion, dataset files, the domain grid, and missions."""

import json
import os

import numpy as np
import pytest

from atrbench.boxes import box_inside
from atrbench.errors import ParameterError
from atrbench.sim import (
    DatasetStore,
    build_grid,
    generate_domain_dataset,
    generate_mission,
    insert_objects,
    load_annotations,
    load_frame,
    load_mission,
    pretrain_block,
    read_grid,
    read_pgm16,
    save_mission,
    write_grid,
    write_pgm16,
)
from atrbench.sim.grid import GRID_COMPLEXITY_RANKS, GRID_NOISE_LEVELS
from atrbench.sim.grid import test_pool as sample_test_pool
from atrbench.sim.mission import MissionManifest
from atrbench.sim.scene import annotation_for

GRID = build_grid()
BY_ID = {d.domain_id: d for d in GRID}


# ------------------------------------------------------------- object insertion

def test_object_rate_conservation():
    placements = insert_objects(GRID[0], 500, 0.2, seed=1)
    assert len(placements) == 100
    assert all(len(v) >= 1 for v in placements.values())


def test_zero_rate_no_objects():
    assert insert_objects(GRID[0], 50, 0.0, seed=1) == {}


def test_full_rate_all_frames():
    placements = insert_objects(GRID[0], 10, 1.0, seed=1)
    assert sorted(placements) == list(range(10))
    assert all(len(v) >= 1 for v in placements.values())


def test_placements_keep_highlight_and_shadow_in_frame():
    placements = insert_objects(GRID[10], 40, 1.0, seed=3)
    for specs in placements.values():
        for spec in specs:
            assert box_inside(annotation_for(spec).bbox, 1000, 500)


def test_invalid_rate_rejected():
    with pytest.raises(ParameterError):
        insert_objects(GRID[0], 10, 1.5, seed=0)


def test_insertion_deterministic():
    a = insert_objects(GRID[4], 30, 0.3, seed=9)
    b = insert_objects(GRID[4], 30, 0.3, seed=9)
    assert a == b


# ------------------------------------------------------------- PGM round trip

def test_pgm16_roundtrip_is_lossless(tmp_path, rng):
    values = np.round(rng.random((500, 1000)) * 65535) / 65535
    path = tmp_path / "frame.pgm"
    write_pgm16(path, values.astype(np.float32))
    back = read_pgm16(path)
    assert np.array_equal(back, values.astype(np.float32))
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n1000 500\n65535\n")
    assert len(raw) == len(b"P5\n1000 500\n65535\n") + 2 * 500 * 1000


# ------------------------------------------------------------- datasets

def test_generate_domain_dataset_files_and_index(tmp_path):
    domain = BY_ID["n1c03"]
    summary = generate_domain_dataset(domain, 10, seed=5, root=tmp_path, object_rate=0.2)
    assert summary["frames"] == 10
    assert summary["object_frames"] == 2
    frames_dir = tmp_path / "n1c03" / "frames"
    assert len(list(frames_dir.glob("*.pgm"))) == 10
    annotations = load_annotations(tmp_path, "n1c03")
    assert len(annotations) == 2
    for index, anns in annotations.items():
        frame = load_frame(tmp_path, "n1c03", index)
        assert frame.annotations == anns
        for a in anns:
            assert box_inside(a.bbox, 1000, 500)


def test_dataset_regeneration_is_byte_identical(tmp_path):
    domain = BY_ID["n0c02"]
    root_a, root_b = tmp_path / "a", tmp_path / "b"
    generate_domain_dataset(domain, 4, seed=3, root=root_a)
    generate_domain_dataset(domain, 4, seed=3, root=root_b)
    for name in ["annotations.json"] + [f"frames/{i}.pgm" for i in range(4)]:
        assert (root_a / "n0c02" / name).read_bytes() == (root_b / "n0c02" / name).read_bytes()


def test_single_frame_dataset(tmp_path):
    generate_domain_dataset(BY_ID["n0c00"], 1, seed=3, root=tmp_path)
    store = DatasetStore(tmp_path)
    assert store.frame_count("n0c00") == 1
    frame = store.frame("n0c00", 0)
    assert frame.pixels.shape == (500, 1000)


def test_bad_frame_count_rejected(tmp_path):
    with pytest.raises(ParameterError):
        generate_domain_dataset(BY_ID["n0c00"], 0, seed=1, root=tmp_path)


# ------------------------------------------------------------- grid

def test_grid_shape_and_ids():
    assert len(GRID) == 160
    noise_levels = {d.noise_level for d in GRID}
    assert noise_levels == set(range(GRID_NOISE_LEVELS))
    for noise in range(GRID_NOISE_LEVELS):
        ranks = sorted(d.complexity_rank for d in GRID if d.noise_level == noise)
        assert ranks == list(range(GRID_COMPLEXITY_RANKS))
    assert len({d.domain_id for d in GRID}) == 160


def test_pretrain_block_is_49_low_corner():
    block = pretrain_block(GRID)
    assert len(block) == 49
    for domain_id in block:
        d = BY_ID[domain_id]
        assert d.noise_level < 7 and d.complexity_rank < 7


def test_test_pool_excludes_pretrain_block():
    pool = sample_test_pool(GRID, 16, seed=7)
    assert len(pool) == 16
    assert set(pool).isdisjoint(pretrain_block(GRID))
    assert pool == sample_test_pool(GRID, 16, seed=7)


def test_grid_json_roundtrip(tmp_path):
    write_grid(tmp_path, GRID)
    loaded = read_grid(tmp_path)
    assert loaded == GRID
    raw = json.loads((tmp_path / "grid.json").read_text())
    assert len(raw["domains"]) == 160
    entry = raw["domains"][0]
    assert {"domain_id", "noise_level", "recipe", "complexity_rank"} <= set(entry)


# ------------------------------------------------------------- missions

def _tiny_store(tmp_path, domains=("n0c00", "n0c01", "n1c02", "n2c03"), frames=12):
    write_grid(tmp_path, GRID)
    for domain_id in domains:
        generate_domain_dataset(BY_ID[domain_id], frames, seed=2, root=tmp_path,
                                object_rate=0.25)
    return DatasetStore(tmp_path)


@pytest.fixture(scope="module")
def mission_store(tmp_path_factory):
    return _tiny_store(tmp_path_factory.mktemp("missions"), frames=120)


def test_single_domain_mission(mission_store):
    manifest = generate_mission(["n0c00"], 100, 1, 0.2, seed=4, store=mission_store)
    assert manifest.n_frames == 100
    assert manifest.is_single_domain
    assert manifest.segments == [("n0c00", 0, 100)]
    indices = [i for _, i in manifest.frame_refs]
    assert len(set(indices)) == 100  # no replacement
    with_objects = sum(
        1 for _, i in manifest.frame_refs if i in mission_store.annotations("n0c00")
    )
    assert with_objects == 20


def test_multi_domain_mission_equal_split(mission_store):
    pool = ["n0c00", "n0c01", "n1c02", "n2c03"]
    manifest = generate_mission(pool, 120, 3, 0.2, seed=5, store=mission_store)
    lengths = [l for _, _, l in manifest.segments]
    assert lengths == [40, 40, 40]
    domains = [d for d, _, _ in manifest.segments]
    assert len(set(domains)) == 3
    manifest.validate()


def test_mission_pool_too_small_rejected(mission_store):
    with pytest.raises(ParameterError):
        generate_mission(["n0c00"], 100, 2, 0.2, seed=1, store=mission_store)


def test_mission_frame_bounds_enforced(mission_store):
    with pytest.raises(ParameterError):
        generate_mission(["n0c00"], 50, 1, 0.2, seed=1, store=mission_store)
    with pytest.raises(ParameterError):
        generate_mission(["n0c00"], 300, 1, 0.2, seed=1, store=mission_store)


def test_mission_generation_deterministic(mission_store):
    a = generate_mission(["n0c00", "n0c01"], 100, 2, 0.2, seed=9, store=mission_store)
    b = generate_mission(["n0c00", "n0c01"], 100, 2, 0.2, seed=9, store=mission_store)
    assert a.frame_refs == b.frame_refs and a.segments == b.segments


def test_mission_json_roundtrip(tmp_path, mission_store):
    manifest = generate_mission(["n0c00", "n0c01"], 100, 2, 0.2, seed=9,
                                store=mission_store, mission_id="rt")
    path = tmp_path / "rt.mission.json"
    save_mission(manifest, path)
    loaded = load_mission(path)
    assert loaded.mission_id == "rt"
    assert loaded.frame_refs == manifest.frame_refs
    assert loaded.segments == manifest.segments


def test_manifest_validation_catches_mismatch():
    manifest = MissionManifest("bad", [("a", 0), ("a", 1)], [("b", 0, 2)])
    with pytest.raises(ParameterError):
        manifest.validate()
