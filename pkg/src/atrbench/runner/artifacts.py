"""Pretraining outputs: detector checkpoint, autoencoder, signatures, records."""

import json
import os
from dataclasses import dataclass, field

from ..detector import ModelState, checkpoint_name, load_model, save_model
from ..errors import StorageError
from ..features import (
    AutoencoderModel,
    FeatureConfig,
    FeatureDistribution,
    build_distribution,
    load_autoencoder,
    load_signature,
    save_autoencoder,
    save_signature,
)
from ..mining import FrameRecord, FrameRef

PRETRAIN_MANIFEST = "pretrain.json"


@dataclass
class PretrainArtifacts:
    """Everything a mission run needs from offline pretraining."""

    model: ModelState
    autoencoder: AutoencoderModel
    feature_config: FeatureConfig
    feature_seed: int
    pretrain_records: list
    meta: dict = field(default_factory=dict)
    _signature_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for record in self.pretrain_records:
            key = (record.ref.domain_id, record.ref.index)
            if record.signature is not None:
                self._signature_cache[key] = record.signature

    def signature_for(self, store, domain_id: str, index: int) -> FeatureDistribution:
        """Signature of any world frame, cached; policy- and seed-independent."""
        key = (domain_id, index)
        sig = self._signature_cache.get(key)
        if sig is None:
            frame = store.frame(domain_id, index)
            sig = build_distribution(
                self.autoencoder, frame, self.feature_config, self.feature_seed
            )
            self._signature_cache[key] = sig
        return sig

    def save(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        save_model(self.model, os.path.join(out_dir, checkpoint_name(self.model.version)))
        save_autoencoder(
            self.autoencoder,
            os.path.join(out_dir, "autoencoder.bin"),
            extra_meta={
                "feature_config": self.feature_config.to_json(),
                "feature_seed": self.feature_seed,
            },
        )
        sig_root = os.path.join(out_dir, "signatures")
        for record in self.pretrain_records:
            ddir = os.path.join(sig_root, record.ref.domain_id)
            os.makedirs(ddir, exist_ok=True)
            save_signature(os.path.join(ddir, f"{record.ref.index}.sig"), record.signature)
        manifest = {
            "model_checkpoint": checkpoint_name(self.model.version),
            "records": [
                {"domain_id": r.ref.domain_id, "index": r.ref.index}
                for r in self.pretrain_records
            ],
            "meta": self.meta,
        }
        path = os.path.join(out_dir, PRETRAIN_MANIFEST)
        try:
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(manifest, fh, indent=1, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise StorageError(f"cannot write {path}: {exc}") from exc

    @classmethod
    def load(cls, out_dir) -> "PretrainArtifacts":
        path = os.path.join(out_dir, PRETRAIN_MANIFEST)
        try:
            with open(path, "r", encoding="utf-8") as fh:
                manifest = json.load(fh)
        except OSError as exc:
            raise StorageError(f"cannot read {path}: {exc}") from exc
        model = load_model(os.path.join(out_dir, manifest["model_checkpoint"]))
        autoencoder = load_autoencoder(os.path.join(out_dir, "autoencoder.bin"))
        feature_config = FeatureConfig.from_json(autoencoder.metadata["feature_config"])
        feature_seed = int(autoencoder.metadata["feature_seed"])
        records = []
        for entry in manifest["records"]:
            sig_path = os.path.join(
                out_dir, "signatures", entry["domain_id"], f"{entry['index']}.sig"
            )
            records.append(
                FrameRecord(
                    ref=FrameRef(entry["domain_id"], entry["index"], source="pretrain"),
                    signature=load_signature(sig_path, feature_config),
                    labeled=True,
                )
            )
        return cls(
            model=model,
            autoencoder=autoencoder,
            feature_config=feature_config,
            feature_seed=feature_seed,
            pretrain_records=records,
            meta=manifest.get("meta", {}),
        )
