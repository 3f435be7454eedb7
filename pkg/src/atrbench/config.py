"""Flat dotted-key configuration for the CLI.

Configs are JSON objects with flat dotted keys ("run.learning_rate": 0.001).
Command-line overrides (--set key=value) win over the file, which wins over
the defaults. Unknown keys are rejected. Every command writes the resolved
values to effective-config.json in its output directory.
"""

import json
import os

from .errors import ParameterError, StorageError

# key: (type, default, help)
CONFIG_SCHEMA = {
    "world.seed": (int, 0, "seed for terrain, objects, and noise"),
    "world.frames_per_domain": (int, 100, "frames per generated domain"),
    "world.object_rate": (float, 0.2, "fraction of frames carrying objects"),
    "world.domains": (int, None, "generate only the first N domains of the grid"),
    "world.domain_ids": (str, None, "comma-separated explicit domain ids to generate"),
    "world.sweep_ready": (bool, False,
                          "generate the pretraining block plus the sweep test pool"),
    "world.pretrain_frames": (int, 24, "frames per pretraining domain (sweep_ready)"),
    "world.test_frames": (int, 110, "frames per test domain (sweep_ready)"),
    "world.missions": (int, 0, "also write N single- and N multi-domain missions"),
    "world.mission_frames": (int, 100, "frames per generated mission"),
    "world.mission_segments": (int, 3, "segments per multi-domain mission"),
    "pretrain.seed": (int, 0, "pretraining seed"),
    "pretrain.det_epochs": (int, 60, "detector epochs over the patch bank"),
    "pretrain.det_batch_size": (int, 128, "detector mini-batch size"),
    "pretrain.det_learning_rate": (float, 5e-2, "detector learning rate"),
    "pretrain.det_pos_cap": (int, 8, "positive patches kept per frame"),
    "pretrain.det_neg_per_frame": (int, 4, "background patches kept per frame"),
    "pretrain.ae_epochs": (int, 12, "autoencoder epochs"),
    "pretrain.ae_learning_rate": (float, 1e-3, "autoencoder learning rate"),
    "pretrain.ae_batch_size": (int, 32, "autoencoder mini-batch size"),
    "pretrain.ae_snippets_per_frame": (int, 6, "snippets per frame for the corpus"),
    "pretrain.ae_corpus_cap": (int, 6000, "autoencoder corpus cap"),
    "pretrain.fit_sample_cap": (int, 4000, "vectors used to fit bin ranges"),
    "pretrain.stride": (int, 32, "patch stride during pretraining"),
    "pretrain.feature_seed": (int, 0, "seed of the snippet sampler for signatures"),
    "run.seed": (int, 0, "mission run seed"),
    "run.learning_rate": (float, 1e-3, "online learning rate (0 disables updates)"),
    "run.steps_per_retrain": (int, 30, "gradient steps per retraining round"),
    "run.retrain_period": (int, 10, "frames between retraining rounds"),
    "run.epsilon": (float, 0.1, "hard-mining exploration constant"),
    "run.score_threshold": (float, 0.5, "detection score threshold"),
    "run.nms_iou": (float, 0.5, "non-maximum-suppression IoU"),
    "run.stride": (int, 32, "patch stride during missions"),
    "run.pos_cap": (int, 6, "positive patches per selected frame"),
    "run.neg_per_frame": (int, 6, "background patches per selected frame"),
    "run.pretrain_count": (int, 10, "frames selected from the pretraining pool"),
    "run.mission_count": (int, 10, "frames selected from the mission pool"),
    "run.two_stage": (bool, False, "similarity prefilter before hard mining"),
    "run.pool_factor": (int, 3, "two-stage candidate pool factor"),
    "run.rolling_window": (int, 20, "rolling mAP window (frames)"),
    "run.refresh_selected_losses": (bool, True,
                                    "recompute losses of mined frames after retraining"),
    "sweep.missions_per_scenario": (int, 20, "missions per scenario class"),
    "sweep.mission_frames": (int, 100, "frames per sweep mission"),
    "sweep.seeds": (str, "0,1,2", "comma-separated run seeds"),
    "sweep.test_domain_count": (int, 16, "test domains sampled outside the block"),
    "sweep.test_pool_seed": (int, 7, "seed of the test-domain sample"),
    "sweep.mission_seed": (int, 101, "seed of mission generation"),
    "sweep.multi_segments": (int, 3, "segments per multi-domain mission"),
    "sweep.object_rate": (float, 0.2, "object rate of sweep missions"),
    "serve.host": (str, "127.0.0.1", "bind address"),
    "serve.port": (int, 8008, "bind port"),
}


def _coerce(key: str, value):
    typ, _, _ = CONFIG_SCHEMA[key]
    if value is None:
        return None
    if typ is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        raise ParameterError(f"{key}: expected true/false, got {value!r}")
    try:
        return typ(value)
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"{key}: cannot interpret {value!r} as {typ.__name__}") from exc


def default_config() -> dict:
    return {key: default for key, (_, default, _) in CONFIG_SCHEMA.items()}


def load_config(path=None, overrides=()) -> dict:
    """Resolve defaults <- file <- overrides; unknown keys are rejected."""
    config = default_config()
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise StorageError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ParameterError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ParameterError(f"config {path} must be a JSON object")
        for key, value in file_cfg.items():
            if key not in CONFIG_SCHEMA:
                raise ParameterError(f"unknown config key {key!r}")
            config[key] = _coerce(key, value)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ParameterError(f"override {item!r} must look like key=value")
        if key not in CONFIG_SCHEMA:
            raise ParameterError(f"unknown config key {key!r}")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        config[key] = _coerce(key, parsed)
    return config


def section(config: dict, prefix: str) -> dict:
    """Sub-dict of one dotted section with the prefix stripped."""
    head = prefix + "."
    return {k[len(head):]: v for k, v in config.items() if k.startswith(head)}


def write_effective_config(config: dict, out_dir, command: str, extra: dict | None = None):
    os.makedirs(out_dir, exist_ok=True)
    payload = {"command": command, "config": dict(sorted(config.items()))}
    if extra:
        payload.update(extra)
    path = os.path.join(out_dir, "effective-config.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path
