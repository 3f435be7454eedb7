"""The online loop over one mission: predict, label, select, retrain, evaluate.

Evaluation protocol: initial mAP scores the frozen pretrained model over the
whole mission; final mAP scores each frame's detections as produced at first
encounter by the adapting model, so adaptation only affects later frames.
"""

import json
import time
from dataclasses import dataclass, field

import numpy as np

from ..detector import train_step
from ..detector.model import cross_entropy_from_logits, forward_logits
from ..detector.patches import PATCH_SIZE, label_patches, patch_grid
from ..detector.predict import detections_from_logits
from ..distance import frame_distance
from ..errors import DivergenceError, EmptyBatchError, OrderingError, ParameterError
from ..evaluation import compute_map, rolling_map
from ..frames import FRAME_HEIGHT, FRAME_WIDTH
from ..mining import (
    FrameRecord,
    FrameRef,
    compose_batch,
    select_mission,
    select_pretrain,
)
from ..seeding import derive_seed
from .config import RunConfig


@dataclass
class EvalReport:
    """Outcome of one mission run. Wall-clock timings are held in memory and
    written to a separate sidecar so serialized reports stay reproducible."""

    run_id: str
    mission_id: str
    policy_label: str
    seed: int
    n_frames: int
    frames: list
    initial_map: float
    final_map: float
    map_increase: float
    pct_increase: float
    loss_curve: list
    rolling_map: list
    detection_counts: list
    model_versions: list
    selection_traces: list
    retrain_rounds: int
    final_model_version: int
    initial_model_version: int
    config: dict
    error: str | None = None
    wall_clock_rounds: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "run_id": self.run_id,
            "mission_id": self.mission_id,
            "policy": self.policy_label,
            "seed": self.seed,
            "n_frames": self.n_frames,
            "frames": [[d, int(i)] for d, i in self.frames],
            "initial_map": self.initial_map,
            "final_map": self.final_map,
            "map_increase": self.map_increase,
            "pct_increase": self.pct_increase,
            "loss_curve": self.loss_curve,
            "rolling_map": self.rolling_map,
            "detection_counts": self.detection_counts,
            "model_versions": self.model_versions,
            "selection_traces": self.selection_traces,
            "retrain_rounds": self.retrain_rounds,
            "final_model_version": self.final_model_version,
            "initial_model_version": self.initial_model_version,
            "config": self.config,
            "error": self.error,
        }

    def timing_json(self) -> dict:
        return {"run_id": self.run_id, "wall_clock_rounds": self.wall_clock_rounds}


class MissionEngine:
    """Stepwise mission driver shared by the oracle runner and the live service."""

    def __init__(self, model, manifest, config: RunConfig, store, artifacts,
                 initial_detections=None, run_id: str | None = None):
        manifest.validate()
        self.model = model
        self.initial_model = model.copy()
        self.initial_version = model.version
        self.manifest = manifest
        self.config = config
        self.store = store
        self.artifacts = artifacts
        self.run_id = run_id or f"{manifest.mission_id}-{config.policy.label}-s{config.seed}"

        n = manifest.n_frames
        self._boxes = patch_grid(config.stride, FRAME_HEIGHT, FRAME_WIDTH)
        self._pos_by_key = {key: p for p, key in enumerate(manifest.frame_refs)}
        self._pretrain_by_ref = {r.ref: r for r in artifacts.pretrain_records}
        self.cursor = 0
        self.labeled_count = 0
        self.round = 0
        self.error: str | None = None
        self.encounter_dets = [None] * n
        self.encounter_version = [None] * n
        self.initial_dets = list(initial_detections) if initial_detections else [None] * n
        if initial_detections and len(self.initial_dets) != n:
            raise ParameterError("initial_detections length does not match the mission")
        self._logits = [None] * n
        self.labels = [None] * n
        self.loss_curve = [None] * n
        self.mission_records: list[FrameRecord] = []
        self._record_by_pos: dict[int, FrameRecord] = {}
        self.selection_traces: list[dict] = []
        self.events: list[dict] = []
        self.wall_clock_rounds: list[float] = []

    # ------------------------------------------------------------- frame flow

    def has_next(self) -> bool:
        return self.cursor < self.manifest.n_frames and self.error is None

    def frame_at(self, position: int):
        domain_id, index = self.manifest.frame_refs[position]
        return self.store.frame(domain_id, index)

    def next_frame(self):
        """Serve the next frame: detections from the current model version."""
        if self.cursor >= self.manifest.n_frames:
            return None
        position = self.cursor
        frame = self.frame_at(position)
        logits = forward_logits(self.model, self._patches_for(frame))
        dets = detections_from_logits(
            logits, self._boxes, score_threshold=self.config.score_threshold,
            nms_iou=self.config.nms_iou,
        )
        self._logits[position] = logits
        self.encounter_dets[position] = dets
        self.encounter_version[position] = self.model.version
        if self.initial_dets[position] is None:
            if self.model.version == self.initial_version:
                self.initial_dets[position] = dets
            else:
                init_logits = forward_logits(self.initial_model, self._patches_for(frame))
                self.initial_dets[position] = detections_from_logits(
                    init_logits, self._boxes,
                    score_threshold=self.config.score_threshold,
                    nms_iou=self.config.nms_iou,
                )
        self.cursor += 1
        self._event(
            "frame_seen", step=position, domain_id=frame.domain_id,
            frame_index=frame.frame_index, model_version=self.model.version,
            n_detections=len(dets),
        )
        return position, frame, dets

    def _patches_for(self, frame):
        win = np.lib.stride_tricks.sliding_window_view(
            frame.pixels, (PATCH_SIZE, PATCH_SIZE)
        )
        return win[:: self.config.stride, :: self.config.stride].reshape(
            -1, PATCH_SIZE, PATCH_SIZE
        )

    # ------------------------------------------------------------- labeling

    def submit_labels(self, position: int, annotations) -> dict:
        """Store operator labels for a served frame; retrain on period boundaries."""
        if position >= self.cursor or position < 0:
            raise OrderingError(
                f"frame {position} has not been served yet (cursor={self.cursor})"
            )
        domain_id, index = self.manifest.frame_refs[position]
        first_time = self.labels[position] is None
        self.labels[position] = list(annotations)

        loss = cross_entropy_from_logits(
            self._logits[position], label_patches(self._boxes, self.labels[position])
        )
        self.loss_curve[position] = loss
        signature = self.artifacts.signature_for(self.store, domain_id, index)

        if first_time:
            record = FrameRecord(
                ref=FrameRef(domain_id, index, source="mission"),
                signature=signature, latest_loss=loss, labeled=True, seen_at=position,
            )
            self.mission_records.append(record)
            self._record_by_pos[position] = record
            self.labeled_count += 1
        else:
            record = self._record_by_pos[position]
            record.latest_loss = loss

        self._event("labels_received", step=position, n_labels=len(self.labels[position]))
        self._event("loss_update", step=position, domain_id=domain_id,
                    frame_index=index, loss=loss)

        ack = {
            "accepted": True,
            "retrained": False,
            "model_version": self.model.version,
            "round": self.round,
        }
        boundary = (
            first_time
            and self.labeled_count % self.config.retrain_period == 0
            and self.config.steps_per_retrain > 0
        )
        if boundary and self.error is None:
            provenance = self._retrain(position)
            ack.update(
                retrained=provenance is not None,
                model_version=self.model.version,
                round=self.round,
                batch_provenance=provenance,
            )
            if self.error is not None:
                ack["error"] = self.error
        return ack

    # ------------------------------------------------------------- retraining

    def _batch_loader(self, ref: FrameRef):
        frame = self.store.frame(ref.domain_id, ref.index)
        if ref.source == "mission":
            position = self._pos_by_key[(ref.domain_id, ref.index)]
            return frame.pixels, self.labels[position]
        return frame.pixels, frame.annotations

    def _retrain(self, at_position: int):
        config = self.config
        policy = config.policy
        started = time.perf_counter()
        query_position = max(p for p in self._record_by_pos)
        query_signature = self._record_by_pos[query_position].signature

        select_seed = derive_seed("select", config.seed, self.round)
        pretrain_sel = select_pretrain(
            policy.pretrain_method, self.artifacts.pretrain_records,
            query_signature, policy.pretrain_count, select_seed,
        )
        mission_sel = select_mission(
            policy, self.mission_records, query_signature, config.epsilon,
            derive_seed("select-mission", config.seed, self.round),
        )
        self._trace_selection(at_position, pretrain_sel, mission_sel, query_signature)

        try:
            batch = compose_batch(
                policy, pretrain_sel, mission_sel, self._batch_loader,
                seed=derive_seed("batch", config.seed, self.round),
                pos_cap=config.pos_cap, neg_per_frame=config.neg_per_frame,
                stride=config.stride,
            )
        except EmptyBatchError:
            self._event("retrain_round", round=self.round, step=at_position,
                        skipped="empty batch")
            return None

        version_before = self.model.version
        try:
            for _ in range(config.steps_per_retrain):
                train_step(self.model, batch, config.learning_rate)
        except DivergenceError as exc:
            self.error = f"divergence during retraining round {self.round}: {exc}"
            self._event("retrain_round", round=self.round, step=at_position,
                        error=self.error)
            return None

        if config.refresh_selected_losses and (
            policy.mission_method == "hard_mining" or policy.two_stage
        ):
            self._refresh_losses(mission_sel, at_position)

        provenance = batch.provenance_frame_counts()
        provenance["patches"] = len(batch)
        self.round += 1
        self._event(
            "retrain_round", round=self.round, step=at_position,
            version_before=version_before, version_after=self.model.version,
            steps=self.config.steps_per_retrain, batch=provenance,
            trained_positions=sorted(
                self._pos_by_key[(ref.domain_id, ref.index)] for ref in mission_sel
            ),
        )
        self.wall_clock_rounds.append(time.perf_counter() - started)
        return provenance

    def _refresh_losses(self, mission_sel, at_position: int):
        for ref in mission_sel:
            position = self._pos_by_key[(ref.domain_id, ref.index)]
            frame = self.store.frame(ref.domain_id, ref.index)
            logits = forward_logits(self.model, self._patches_for(frame))
            loss = cross_entropy_from_logits(
                logits, label_patches(self._boxes, self.labels[position])
            )
            self._record_by_pos[position].latest_loss = loss
            self._event("loss_update", step=at_position, domain_id=ref.domain_id,
                        frame_index=ref.index, loss=loss, refreshed=True)

    def _trace_selection(self, at_position, pretrain_sel, mission_sel, query_signature):
        def describe(ref: FrameRef):
            entry = {"domain_id": ref.domain_id, "index": ref.index}
            if ref.source == "mission":
                record = self._record_by_pos[self._pos_by_key[(ref.domain_id, ref.index)]]
            else:
                record = self._pretrain_by_ref[ref]
            entry["loss"] = record.latest_loss
            sig = record.signature
            entry["distance"] = (
                frame_distance(query_signature, sig).value if sig is not None else None
            )
            return entry

        trace = {
            "round": self.round,
            "step": at_position,
            "policy": self.config.policy.label,
            "pretrain": [describe(r) for r in pretrain_sel],
            "mission": [describe(r) for r in mission_sel],
        }
        self.selection_traces.append(trace)
        self._event("selection", **trace)

    # ------------------------------------------------------------- evaluation

    def _labeled_positions(self):
        return [p for p in range(self.manifest.n_frames) if self.labels[p] is not None]

    def metrics(self) -> dict:
        positions = self._labeled_positions()
        initial = running = 0.0
        if positions:
            truths = [self.labels[p] for p in positions]
            initial = compute_map(
                [self.initial_dets[p] for p in positions], truths, self.config.eval_iou
            )
            running = compute_map(
                [self.encounter_dets[p] for p in positions], truths, self.config.eval_iou
            )
        return {
            "frames_served": self.cursor,
            "frames_labeled": len(positions),
            "mission_frames": self.manifest.n_frames,
            "model_version": self.model.version,
            "retrain_rounds": self.round,
            "initial_map": initial,
            "running_map": running,
            "map_increase": running - initial,
            "loss_history": [self.loss_curve[p] for p in positions],
            "last_selection": self.selection_traces[-1] if self.selection_traces else None,
            "error": self.error,
        }

    def finalize(self) -> EvalReport:
        positions = self._labeled_positions()
        truths = [self.labels[p] for p in positions]
        enc = [self.encounter_dets[p] for p in positions]
        init = [self.initial_dets[p] for p in positions]
        initial = compute_map(init, truths, self.config.eval_iou) if positions else 0.0
        final = compute_map(enc, truths, self.config.eval_iou) if positions else 0.0
        increase = final - initial
        rolling = rolling_map(enc, truths, self.config.rolling_window, self.config.eval_iou)
        report = EvalReport(
            run_id=self.run_id,
            mission_id=self.manifest.mission_id,
            policy_label=self.config.policy.label,
            seed=self.config.seed,
            n_frames=self.manifest.n_frames,
            frames=list(self.manifest.frame_refs),
            initial_map=initial,
            final_map=final,
            map_increase=increase,
            pct_increase=(100.0 * increase / initial) if initial > 0 else 0.0,
            loss_curve=[self.loss_curve[p] for p in positions],
            rolling_map=rolling,
            detection_counts=[len(self.encounter_dets[p]) for p in positions],
            model_versions=[self.encounter_version[p] for p in positions],
            selection_traces=self.selection_traces,
            retrain_rounds=self.round,
            final_model_version=self.model.version,
            initial_model_version=self.initial_version,
            config=self.config.to_json(),
            error=self.error,
            wall_clock_rounds=self.wall_clock_rounds,
        )
        self._event("eval", initial_map=initial, final_map=final, map_increase=increase)
        return report

    # ------------------------------------------------------------- logging

    def _event(self, kind: str, **payload):
        self.events.append({"event": kind, **payload})

    def write_log(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for event in self.events:
                fh.write(json.dumps(event, sort_keys=True) + "\n")


def run_mission(model, manifest, config: RunConfig, store, artifacts,
                initial_detections=None, log_path=None, run_id=None) -> EvalReport:
    """Oracle-operator mission: ground-truth labels arrive for every frame."""
    engine = MissionEngine(
        model, manifest, config, store, artifacts,
        initial_detections=initial_detections, run_id=run_id,
    )
    while engine.has_next():
        position, frame, _ = engine.next_frame()
        engine.submit_labels(position, frame.annotations)
    report = engine.finalize()
    if log_path:
        engine.write_log(log_path)
    return report
