"""Experiment sweeps over all nine data-selection policies.

Missions and selections are deterministic functions of the sweep seed, so two
sweeps with identical config produce byte-identical results files regardless
of completion order. Runs parallelize across missions with process workers;
workers pin BLAS to one thread so results do not depend on worker count.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..detector.predict import detections_from_logits
from ..detector.model import forward_logits
from ..detector.patches import PATCH_SIZE, patch_grid
from ..errors import ParameterError
from ..frames import FRAME_HEIGHT, FRAME_WIDTH
from ..mining import SelectionPolicy
from ..seeding import derive_seed
from ..sim.dataset import DatasetStore
from ..sim.grid import test_pool
from ..sim.mission import MissionManifest, generate_mission
from .config import RunConfig
from .engine import run_mission

# row order mirrors the result tables: grouped by mission-side method
TABLE_ORDER = (
    ("none", "sliding_window"),
    ("random", "sliding_window"),
    ("similarity", "sliding_window"),
    ("none", "hard_mining"),
    ("random", "hard_mining"),
    ("similarity", "hard_mining"),
    ("none", "similarity"),
    ("random", "similarity"),
    ("similarity", "similarity"),
)


def default_policies(pretrain_count: int = 10, mission_count: int = 10):
    """The nine combinations evaluated in the sweep, in table order."""
    return [
        SelectionPolicy(
            pretrain_method=pre, mission_method=mis,
            pretrain_count=pretrain_count, mission_count=mission_count,
        )
        for pre, mis in TABLE_ORDER
    ]


@dataclass(frozen=True)
class SweepConfig:
    scenarios: tuple = ("single", "multi")
    missions_per_scenario: int = 20
    mission_frames: int = 100
    seeds: tuple = (0, 1, 2)
    test_domain_count: int = 16
    test_pool_seed: int = 7
    mission_seed: int = 101
    multi_segments: int = 3
    object_rate: float = 0.2
    jobs: int = 1
    run_overrides: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "scenarios": list(self.scenarios),
            "missions_per_scenario": self.missions_per_scenario,
            "mission_frames": self.mission_frames,
            "seeds": list(self.seeds),
            "test_domain_count": self.test_domain_count,
            "test_pool_seed": self.test_pool_seed,
            "mission_seed": self.mission_seed,
            "multi_segments": self.multi_segments,
            "object_rate": self.object_rate,
            "jobs": self.jobs,
            "run_overrides": dict(self.run_overrides),
        }


def build_missions(store: DatasetStore, config: SweepConfig, scenario: str):
    """Deterministic validation missions for one scenario class."""
    if scenario not in ("single", "multi"):
        raise ParameterError(f"unknown scenario {scenario!r}")
    pool = test_pool(store.grid(), config.test_domain_count, config.test_pool_seed)
    segments = 1 if scenario == "single" else config.multi_segments
    missions = []
    for i in range(config.missions_per_scenario):
        missions.append(
            generate_mission(
                pool, config.mission_frames, segments, config.object_rate,
                seed=derive_seed("sweep-mission", config.mission_seed, scenario, i),
                store=store, mission_id=f"{scenario}-{i:02d}",
            )
        )
    return missions


# ----------------------------------------------------------------- workers

_WORKER: dict = {}


def _init_worker(store_root, artifacts):
    _WORKER["store"] = DatasetStore(store_root)
    _WORKER["artifacts"] = artifacts
    _WORKER["initial_dets"] = {}


def _initial_detections(store, artifacts, manifest, run_cfg: RunConfig):
    """Frozen-model detections for every mission frame (shared across policies)."""
    cache = _WORKER.setdefault("initial_dets", {})
    key = manifest.mission_id
    if key not in cache:
        boxes = patch_grid(run_cfg.stride, FRAME_HEIGHT, FRAME_WIDTH)
        dets = []
        for domain_id, index in manifest.frame_refs:
            frame = store.frame(domain_id, index)
            win = np.lib.stride_tricks.sliding_window_view(
                frame.pixels, (PATCH_SIZE, PATCH_SIZE)
            )
            patches = win[:: run_cfg.stride, :: run_cfg.stride].reshape(
                -1, PATCH_SIZE, PATCH_SIZE
            )
            logits = forward_logits(artifacts.model, patches)
            dets.append(
                detections_from_logits(
                    logits, boxes, score_threshold=run_cfg.score_threshold,
                    nms_iou=run_cfg.nms_iou,
                )
            )
        cache[key] = dets
    return cache[key]


def _run_task(task):
    scenario, manifest_json, policy_fields, seed, run_overrides = task
    store = _WORKER["store"]
    artifacts = _WORKER["artifacts"]
    manifest = MissionManifest.from_json(manifest_json)
    policy = SelectionPolicy(**policy_fields)
    run_cfg = RunConfig(policy=policy, seed=seed, **run_overrides)
    run_id = f"{scenario}-{manifest.mission_id}-{policy.label}-s{seed}"
    initial = _initial_detections(store, artifacts, manifest, run_cfg)
    try:
        report = run_mission(
            artifacts.model.copy(), manifest, run_cfg, store, artifacts,
            initial_detections=initial, run_id=run_id,
        )
        return scenario, policy.label, report.to_json(), report.timing_json()
    except Exception as exc:  # recorded per cell; the sweep continues
        return scenario, policy.label, {
            "run_id": run_id, "mission_id": manifest.mission_id, "seed": seed,
            "error": f"{type(exc).__name__}: {exc}",
        }, {"run_id": run_id, "wall_clock_rounds": []}


def _policy_fields(policy: SelectionPolicy) -> dict:
    return {
        "pretrain_method": policy.pretrain_method,
        "mission_method": policy.mission_method,
        "pretrain_count": policy.pretrain_count,
        "mission_count": policy.mission_count,
        "two_stage": policy.two_stage,
        "pool_factor": policy.pool_factor,
    }


def sweep(store: DatasetStore, artifacts, config: SweepConfig,
          policies=None, manifests=None, progress=None):
    """Run every (policy x mission x seed) cell; returns (results, reports).

    results is the JSON-ready aggregate; reports maps run_id to the full
    per-run report dict (loss curves, rolling mAP, selection traces, ...).
    """
    policies = policies if policies is not None else default_policies()
    if manifests is None:
        manifests = {s: build_missions(store, config, s) for s in config.scenarios}

    tasks = []
    for scenario in config.scenarios:
        for manifest in manifests[scenario]:
            for policy in policies:
                for seed in config.seeds:
                    tasks.append(
                        (scenario, manifest.to_json(), _policy_fields(policy),
                         int(seed), dict(config.run_overrides))
                    )

    outputs = []
    if config.jobs <= 1:
        _init_worker(store.root, artifacts)
        for i, task in enumerate(tasks):
            outputs.append(_run_task(task))
            if progress:
                progress(i + 1, len(tasks))
    else:
        # single-threaded BLAS inside workers keeps runs worker-count independent
        saved = {k: os.environ.get(k) for k in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS")}
        os.environ["OPENBLAS_NUM_THREADS"] = "1"
        os.environ["OMP_NUM_THREADS"] = "1"
        try:
            import multiprocessing as mp

            with ProcessPoolExecutor(
                max_workers=config.jobs, mp_context=mp.get_context("spawn"),
                initializer=_init_worker, initargs=(store.root, artifacts),
            ) as pool:
                for i, out in enumerate(pool.map(_run_task, tasks, chunksize=1)):
                    outputs.append(out)
                    if progress:
                        progress(i + 1, len(tasks))
        finally:
            for key, value in saved.items():
                if value is None:
                    os.environ.pop(key, None)
                else:
                    os.environ[key] = value

    policy_order = [p.label for p in policies]
    results = {
        "sweep_config": config.to_json(),
        "policy_order": policy_order,
        "scenarios": {},
    }
    reports: dict = {}
    timings: dict = {}
    for scenario in config.scenarios:
        cells = {label: [] for label in policy_order}
        for out_scenario, label, report_json, timing in outputs:
            if out_scenario == scenario:
                cells[label].append(report_json)
                reports[report_json["run_id"]] = report_json
                timings[report_json["run_id"]] = timing
        scenario_block = {
            "missions": [m.to_json() for m in manifests[scenario]],
            "cells": {},
        }
        for label in policy_order:
            runs = sorted(cells[label], key=lambda r: (r["mission_id"], r["seed"]))
            good = [r for r in runs if "error" not in r or r.get("error") is None]
            errors = [
                {"run_id": r["run_id"], "error": r["error"]}
                for r in runs
                if r.get("error")
            ]
            summary = {
                "n_runs": len(good),
                "errors": errors,
                "runs": [
                    {
                        "run_id": r["run_id"],
                        "mission_id": r["mission_id"],
                        "seed": r["seed"],
                        "initial_map": r.get("initial_map"),
                        "final_map": r.get("final_map"),
                        "map_increase": r.get("map_increase"),
                        "pct_increase": r.get("pct_increase"),
                        "retrain_rounds": r.get("retrain_rounds"),
                    }
                    for r in runs
                ],
            }
            if good:
                mean_initial = sum(r["initial_map"] for r in good) / len(good)
                mean_final = sum(r["final_map"] for r in good) / len(good)
                mean_increase = sum(r["map_increase"] for r in good) / len(good)
                summary.update(
                    mean_initial_map=mean_initial,
                    mean_final_map=mean_final,
                    mean_map_increase=mean_increase,
                    pct_increase=(
                        100.0 * mean_increase / mean_initial if mean_initial > 0 else 0.0
                    ),
                )
            scenario_block["cells"][label] = summary
        results["scenarios"][scenario] = scenario_block
    return results, reports, timings
