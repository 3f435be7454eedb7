"""Command-line entry points: gen-world, pretrain, run, sweep, report, serve.

Exit codes are a stable contract:
    0 success, 2 config error, 3 I/O error, 4 refusal (exists without --force),
    5 missing upstream artifact, 6 port in use.
Failures print a machine-readable JSON object on stderr.
"""

import argparse
import json
import os
import shutil
import socket
import sys
from concurrent.futures import ProcessPoolExecutor

from .config import load_config, section, write_effective_config
from .errors import ParameterError, StateError, StorageError
from .mining import SelectionPolicy
from .runner import (
    PretrainArtifacts,
    PretrainConfig,
    RunConfig,
    SweepConfig,
    default_policies,
    pretrain,
    render_tables,
    run_mission,
    sweep,
    write_figures,
    write_report,
)
from .runner.reporting import write_trace_csv
from .seeding import derive_seed
from .sim import (
    DatasetStore,
    build_grid,
    generate_domain_dataset,
    generate_mission,
    load_mission,
    pretrain_block,
    save_mission,
    test_pool,
    write_grid,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_REFUSAL = 4
EXIT_MISSING = 5
EXIT_PORT = 6


class Refusal(Exception):
    pass


class MissingArtifact(Exception):
    pass


class PortInUse(Exception):
    pass


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": {"code": code, "kind": kind,
                                           "message": message}}) + "\n")
    return code


def _require(path, what: str):
    if not os.path.exists(path):
        raise MissingArtifact(f"{what} not found: {path}")
    return path


# --------------------------------------------------------------- gen-world

def _gen_one_domain(task):
    domain, frames, seed, root, rate = task
    return generate_domain_dataset(domain, frames, seed, root, object_rate=rate)


def cmd_gen_world(args) -> int:
    sugar = []
    if args.domains is not None:
        sugar.append(f"world.domains={args.domains}")
    if args.frames is not None:
        sugar.append(f"world.frames_per_domain={args.frames}")
    if args.seed is not None:
        sugar.append(f"world.seed={args.seed}")
    cfg = load_config(args.config, list(args.set) + sugar)
    root = args.out
    if os.path.exists(os.path.join(root, "grid.json")) and not args.force:
        raise Refusal(f"world already exists at {root}; rerun with --force")
    if args.force and os.path.isdir(root):
        for name in os.listdir(root):
            path = os.path.join(root, name)
            shutil.rmtree(path) if os.path.isdir(path) else os.remove(path)

    grid = build_grid()
    write_grid(root, grid)
    by_id = {d.domain_id: d for d in grid}
    seed = cfg["world.seed"]
    rate = cfg["world.object_rate"]

    tasks = []
    if cfg["world.sweep_ready"]:
        pool = test_pool(grid, cfg["sweep.test_domain_count"], cfg["sweep.test_pool_seed"])
        for domain_id in pretrain_block(grid):
            tasks.append((by_id[domain_id], cfg["world.pretrain_frames"], seed, root, rate))
        for domain_id in pool:
            tasks.append((by_id[domain_id], cfg["world.test_frames"], seed, root, rate))
    elif cfg["world.domain_ids"]:
        for domain_id in cfg["world.domain_ids"].split(","):
            domain_id = domain_id.strip()
            if domain_id not in by_id:
                raise ParameterError(f"unknown domain id {domain_id!r}")
            tasks.append((by_id[domain_id], cfg["world.frames_per_domain"], seed, root, rate))
    else:
        domains = grid if cfg["world.domains"] is None else grid[: cfg["world.domains"]]
        tasks = [(d, cfg["world.frames_per_domain"], seed, root, rate) for d in domains]

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool_exec:
            summaries = list(pool_exec.map(_gen_one_domain, tasks, chunksize=1))
    else:
        summaries = [_gen_one_domain(t) for t in tasks]

    n_missions = cfg["world.missions"]
    mission_files = []
    if n_missions > 0:
        store = DatasetStore(root)
        generated_ids = [s["domain_id"] for s in summaries]
        mission_dir = os.path.join(root, "missions")
        os.makedirs(mission_dir, exist_ok=True)
        for scenario, segments in (("single", 1), ("multi", cfg["world.mission_segments"])):
            for i in range(n_missions):
                manifest = generate_mission(
                    generated_ids, cfg["world.mission_frames"], segments, rate,
                    seed=derive_seed("world-mission", seed, scenario, i),
                    store=store, mission_id=f"{scenario}-{i:02d}",
                )
                path = os.path.join(mission_dir, f"{manifest.mission_id}.mission.json")
                save_mission(manifest, path)
                mission_files.append(path)

    write_effective_config(cfg, root, "gen-world", {"out": root})
    total_frames = sum(s["frames"] for s in summaries)
    total_objects = sum(s["objects"] for s in summaries)
    print(
        f"world: {len(summaries)} domains, {total_frames} frames, "
        f"{total_objects} objects, {len(mission_files)} missions -> {root}"
    )
    return EXIT_OK


# --------------------------------------------------------------- pretrain

def cmd_pretrain(args) -> int:
    sugar = [f"pretrain.seed={args.seed}"] if args.seed is not None else []
    cfg = load_config(args.config, list(args.set) + sugar)
    _require(os.path.join(args.world, "grid.json"), "world grid")
    store = DatasetStore(args.world)
    p = section(cfg, "pretrain")
    seed = p.pop("seed")
    pre_cfg = PretrainConfig(**p)
    ids = pretrain_block(store.grid())
    missing = [d for d in ids if store.frame_count(d) == 0]
    if missing:
        raise MissingArtifact(
            f"pretrain datasets missing for {len(missing)} domains, "
            f"e.g. {os.path.join(args.world, missing[0])}"
        )
    artifacts = pretrain(store, ids, None, seed, pre_cfg)
    artifacts.save(args.out)
    write_effective_config(cfg, args.out, "pretrain", {"world": args.world})
    print(
        f"pretrained on {len(ids)} domains: model v{artifacts.model.version}, "
        f"{len(artifacts.pretrain_records)} signatures -> {args.out}"
    )
    return EXIT_OK


# --------------------------------------------------------------- run

def _run_config_from(cfg: dict, policy: SelectionPolicy, seed=None) -> RunConfig:
    r = section(cfg, "run")
    run_seed = r.pop("seed") if seed is None else seed
    policy = SelectionPolicy(
        pretrain_method=policy.pretrain_method, mission_method=policy.mission_method,
        pretrain_count=r.pop("pretrain_count"), mission_count=r.pop("mission_count"),
        two_stage=r.pop("two_stage"), pool_factor=r.pop("pool_factor"),
    )
    return RunConfig(policy=policy, seed=run_seed, **r)


def _resolve_mission(args):
    if os.path.exists(args.mission):
        return args.mission
    candidate = os.path.join(args.world, "missions", f"{args.mission}.mission.json")
    return _require(candidate, f"mission {args.mission!r}")


def cmd_run(args) -> int:
    cfg = load_config(args.config, list(args.set))
    _require(os.path.join(args.world, "grid.json"), "world grid")
    _require(os.path.join(args.artifacts, "pretrain.json"), "pretrain manifest")
    store = DatasetStore(args.world)
    artifacts = PretrainArtifacts.load(args.artifacts)
    manifest = load_mission(_resolve_mission(args))
    policy = SelectionPolicy.from_string(args.policy)
    run_cfg = _run_config_from(cfg, policy, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    run_id = f"{manifest.mission_id}-{run_cfg.policy.label}-s{run_cfg.seed}"
    report = run_mission(
        artifacts.model.copy(), manifest, run_cfg, store, artifacts,
        log_path=os.path.join(args.out, f"{run_id}.log.jsonl"), run_id=run_id,
    )
    report_path = os.path.join(args.out, f"{run_id}.report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    write_trace_csv(report.to_json(), os.path.join(args.out, f"{run_id}.csv"))
    with open(os.path.join(args.out, f"{run_id}.timing.json"), "w", encoding="utf-8") as fh:
        json.dump(report.timing_json(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    write_effective_config(cfg, args.out, "run", {"mission": manifest.mission_id,
                                                  "policy": run_cfg.policy.label})
    print(
        f"run {run_id}: initial mAP {report.initial_map:.3f} -> final {report.final_map:.3f} "
        f"(increase {report.map_increase:+.3f}) -> {report_path}"
    )
    return EXIT_OK


# --------------------------------------------------------------- sweep

def cmd_sweep(args) -> int:
    cfg = load_config(args.config, list(args.set))
    _require(os.path.join(args.world, "grid.json"), "world grid")
    _require(os.path.join(args.artifacts, "pretrain.json"), "pretrain manifest")
    store = DatasetStore(args.world)
    artifacts = PretrainArtifacts.load(args.artifacts)
    scenarios = ("single", "multi") if args.scenario == "both" else (args.scenario,)
    s = section(cfg, "sweep")
    run_overrides = section(cfg, "run")
    seeds = tuple(int(v) for v in str(s.pop("seeds")).split(","))
    pretrain_count = run_overrides.pop("pretrain_count")
    mission_count = run_overrides.pop("mission_count")
    for key in ("seed", "two_stage", "pool_factor"):
        run_overrides.pop(key)
    sweep_cfg = SweepConfig(
        scenarios=scenarios, seeds=seeds, jobs=args.jobs,
        run_overrides=run_overrides, **s,
    )
    policies = default_policies(pretrain_count, mission_count)

    def progress(done, total):
        if args.verbose and (done % 25 == 0 or done == total):
            print(f"  sweep progress: {done}/{total} runs", flush=True)

    results, reports, timings = sweep(
        store, artifacts, sweep_cfg, policies=policies,
        progress=progress if args.verbose else None,
    )
    os.makedirs(args.out, exist_ok=True)
    results_path = write_report(results, reports, args.out, timings)
    write_effective_config(cfg, args.out, "sweep", {"scenarios": list(scenarios)})
    print(render_tables(results))
    print(f"results -> {results_path}")
    return EXIT_OK


# --------------------------------------------------------------- report

def cmd_report(args) -> int:
    results_path = args.results
    if os.path.isdir(results_path):
        results_path = os.path.join(results_path, "sweep-results.json")
    _require(results_path, "sweep results")
    with open(results_path, "r", encoding="utf-8") as fh:
        results = json.load(fh)
    os.makedirs(args.out, exist_ok=True)
    out_results = os.path.join(args.out, "sweep-results.json")
    if os.path.abspath(out_results) != os.path.abspath(results_path):
        shutil.copyfile(results_path, out_results)
    with open(os.path.join(args.out, "tables.txt"), "w", encoding="utf-8") as fh:
        fh.write(render_tables(results))
    src_traces = os.path.join(os.path.dirname(results_path), "traces")
    dst_traces = os.path.join(args.out, "traces")
    if os.path.isdir(src_traces) and os.path.abspath(src_traces) != os.path.abspath(dst_traces):
        shutil.copytree(src_traces, dst_traces, dirs_exist_ok=True)
    figures = write_figures(results, args.out, traces_dir=dst_traces)
    print(f"report -> {args.out} ({len(figures)} figures)")
    return EXIT_OK


# --------------------------------------------------------------- serve

def cmd_serve(args) -> int:
    cfg = load_config(args.config, list(args.set))
    _require(os.path.join(args.world, "grid.json"), "world grid")
    _require(os.path.join(args.artifacts, "pretrain.json"), "pretrain manifest")
    host = args.host or cfg["serve.host"]
    port = args.port if args.port is not None else cfg["serve.port"]
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as exc:
        raise PortInUse(f"cannot bind {host}:{port}: {exc}") from exc
    finally:
        probe.close()

    from .service import create_app

    flush_dir = args.out or os.path.join(args.artifacts, "sessions")
    run_overrides = section(cfg, "run")
    for key in ("seed", "pretrain_count", "mission_count", "two_stage", "pool_factor"):
        run_overrides.pop(key)
    app = create_app(
        world_root=args.world, artifacts_dir=args.artifacts,
        missions_dir=args.missions or os.path.join(args.world, "missions"),
        flush_dir=flush_dir, run_overrides=run_overrides,
    )
    write_effective_config(cfg, flush_dir, "serve", {"host": host, "port": port})
    print(f"serving on http://{host}:{port} (sessions flush to {flush_dir})")
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="warning")
    return EXIT_OK


# --------------------------------------------------------------- parser

def _add_common(p, out_required=True):
    p.add_argument("--config", default=None, help="JSON config with flat dotted keys")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="config override (repeatable)")
    p.add_argument("--seed", type=int, default=None, help="primary seed override")
    p.add_argument("--out", required=out_required, help="output directory")
    p.add_argument("--force", action="store_true", help="overwrite existing output")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="atrbench",
        description="Sidescan-sonar ATR workbench: world generation, online "
                    "fine-tuning missions, data-mining sweeps, and reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-world", help="generate the domain grid and datasets")
    _add_common(p)
    p.add_argument("--domains", type=int, default=None, help="only the first N domains")
    p.add_argument("--frames", type=int, default=None, help="frames per domain")
    p.set_defaults(func=cmd_gen_world)

    p = sub.add_parser("pretrain", help="pretrain detector and signature pipeline")
    _add_common(p)
    p.add_argument("--world", required=True, help="world root from gen-world")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("run", help="run one online mission with an oracle operator")
    _add_common(p)
    p.add_argument("--world", required=True)
    p.add_argument("--artifacts", required=True, help="pretrain output directory")
    p.add_argument("--mission", required=True, help="mission file or id")
    p.add_argument("--policy", default="none,sliding_window",
                   help="'<pretrain_method>,<mission_method>'")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run all nine policies over mission sets")
    _add_common(p)
    p.add_argument("--world", required=True)
    p.add_argument("--artifacts", required=True)
    p.add_argument("--scenario", choices=("single", "multi", "both"), default="both")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="render tables and figures from sweep results")
    _add_common(p)
    p.add_argument("--results", required=True, help="sweep output dir or results file")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="serve the live mission session API")
    _add_common(p, out_required=False)
    p.add_argument("--world", required=True)
    p.add_argument("--artifacts", required=True)
    p.add_argument("--missions", default=None, help="missions directory")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Refusal as exc:
        return _fail(EXIT_REFUSAL, "refusal", str(exc))
    except MissingArtifact as exc:
        return _fail(EXIT_MISSING, "missing_artifact", str(exc))
    except PortInUse as exc:
        return _fail(EXIT_PORT, "port_in_use", str(exc))
    except ParameterError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except StateError as exc:
        return _fail(EXIT_MISSING, "missing_artifact", str(exc))
    except StorageError as exc:
        return _fail(EXIT_IO, "io", str(exc))


if __name__ == "__main__":
    sys.exit(main())
