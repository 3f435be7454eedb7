"""Shared fixtures: a small world with the full pretraining block plus two
test domains, and pretrained artifacts on top of it. Built once per session."""

import numpy as np
import pytest

from atrbench.runner import PretrainArtifacts, PretrainConfig, pretrain
from atrbench.sim import (
    DatasetStore,
    build_grid,
    generate_domain_dataset,
    pretrain_block,
    write_grid,
)
from atrbench.sim.mission import MissionManifest

MINI_TEST_DOMAINS = ("n5c15", "n7c17")
MINI_PRETRAIN_FRAMES = 6
MINI_TEST_FRAMES = 14


@pytest.fixture(scope="session")
def mini_world(tmp_path_factory):
    root = tmp_path_factory.mktemp("world")
    grid = build_grid()
    write_grid(root, grid)
    by_id = {d.domain_id: d for d in grid}
    for domain_id in pretrain_block(grid):
        generate_domain_dataset(by_id[domain_id], MINI_PRETRAIN_FRAMES, seed=0, root=root)
    for domain_id in MINI_TEST_DOMAINS:
        generate_domain_dataset(by_id[domain_id], MINI_TEST_FRAMES, seed=0, root=root)
    return root


@pytest.fixture(scope="session")
def mini_store(mini_world):
    return DatasetStore(mini_world)


@pytest.fixture(scope="session")
def mini_pretrain_config():
    return PretrainConfig(
        ae_epochs=4, ae_corpus_cap=1500, ae_snippets_per_frame=4, det_epochs=80,
    )


@pytest.fixture(scope="session")
def mini_artifacts(mini_store, mini_pretrain_config, tmp_path_factory):
    artifacts = pretrain(
        mini_store, pretrain_block(mini_store.grid()), None, seed=0,
        config=mini_pretrain_config,
    )
    out = tmp_path_factory.mktemp("artifacts")
    artifacts.save(out)
    return PretrainArtifacts.load(out)


@pytest.fixture(scope="session")
def mini_artifacts_dir(mini_artifacts, tmp_path_factory):
    out = tmp_path_factory.mktemp("artifacts-dir")
    mini_artifacts.save(out)
    return out


def make_manifest(domain_id: str, n: int, mission_id: str = "m-test") -> MissionManifest:
    refs = [(domain_id, i) for i in range(n)]
    return MissionManifest(mission_id, refs, [(domain_id, 0, n)])


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
