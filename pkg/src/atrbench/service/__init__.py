"""Session API: stream mission frames to an operator console, accept label
corrections, retrain online, and report adaptation metrics.

One MissionEngine per session; submissions for a session are serialized by a
per-session lock, and sessions never share model state. Session state flushes
to disk on shutdown.
"""

import base64
import io
import json
import os
import threading
import uuid
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse

from ..errors import OrderingError, StorageError
from ..frames import Annotation
from ..mining import SelectionPolicy
from ..runner.config import RunConfig
from ..runner.engine import MissionEngine
from ..sim.dataset import DatasetStore, pgm16_bytes
from ..sim.mission import load_mission
from .schemas import CreateSessionRequest, LabelSubmission


def _error(status: int, kind: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": {"kind": kind, "message": message}}
    )


def _preview_png_b64(pixels: np.ndarray) -> str:
    """8-bit min-max stretched preview; display only, never used for evaluation."""
    from PIL import Image

    lo, hi = float(pixels.min()), float(pixels.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    u8 = np.round((pixels - lo) * scale).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(u8, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


class Session:
    def __init__(self, session_id: str, mission_id: str, engine: MissionEngine,
                 policy_label: str):
        self.session_id = session_id
        self.mission_id = mission_id
        self.engine = engine
        self.policy_label = policy_label
        self.lock = threading.Lock()

    def flush_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "mission_id": self.mission_id,
            "policy": self.policy_label,
            "metrics": self.engine.metrics(),
            "report": self.engine.finalize().to_json(),
        }


def create_app(world_root=None, artifacts_dir=None, missions_dir=None,
               flush_dir=None, run_overrides=None) -> FastAPI:
    """Build the session API. World and model artifacts load lazily on first
    use so the schema can be produced without any artifacts on disk."""

    state = {"store": None, "artifacts": None, "sessions": {}, "counter": 0}
    overrides = dict(run_overrides or {})
    registry_lock = threading.Lock()

    def ensure_loaded():
        if state["store"] is None:
            if world_root is None or artifacts_dir is None:
                raise StorageError("service started without world or artifacts")
            state["store"] = DatasetStore(world_root)
            from ..runner.artifacts import PretrainArtifacts

            state["artifacts"] = PretrainArtifacts.load(artifacts_dir)
        return state["store"], state["artifacts"]

    def flush_sessions():
        if not flush_dir or not state["sessions"]:
            return
        os.makedirs(flush_dir, exist_ok=True)
        for session in state["sessions"].values():
            with session.lock:
                path = os.path.join(flush_dir, f"{session.session_id}.json")
                with open(path, "w", encoding="utf-8") as fh:
                    json.dump(session.flush_json(), fh, indent=1, sort_keys=True)
                    fh.write("\n")

    @asynccontextmanager
    async def lifespan(app):
        yield
        flush_sessions()

    app = FastAPI(title="atrbench session API", version="1.0.0", lifespan=lifespan)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionRequest):
        store, artifacts = ensure_loaded()
        mission_path = os.path.join(
            missions_dir or os.path.join(world_root, "missions"),
            f"{body.mission_id}.mission.json",
        )
        if not os.path.exists(mission_path):
            return _error(404, "not_found", f"unknown mission {body.mission_id!r}")
        manifest = load_mission(mission_path)
        try:
            policy = SelectionPolicy.from_string(body.policy)
            run_config = RunConfig(policy=policy, seed=body.seed, operator="interactive",
                                   **overrides)
        except Exception as exc:
            return _error(422, "bad_policy", str(exc))
        engine = MissionEngine(
            artifacts.model.copy(), manifest, run_config, store, artifacts,
        )
        with registry_lock:
            state["counter"] += 1
            session_id = f"sess-{state['counter']:04d}-{uuid.uuid4().hex[:8]}"
            session = Session(session_id, body.mission_id, engine, policy.label)
            state["sessions"][session_id] = session
        return {
            "session_id": session_id,
            "mission_id": body.mission_id,
            "policy": policy.label,
            "n_frames": manifest.n_frames,
            "model_version": engine.model.version,
        }

    def _get_session(session_id: str):
        return state["sessions"].get(session_id)

    @app.get("/sessions/{session_id}/frames/next")
    def next_frame(session_id: str):
        session = _get_session(session_id)
        if session is None:
            return _error(404, "not_found", f"unknown session {session_id!r}")
        with session.lock:
            engine = session.engine
            result = engine.next_frame()
            if result is None:
                return {
                    "end_of_mission": True,
                    "progress": {
                        "cursor": engine.cursor,
                        "total": engine.manifest.n_frames,
                    },
                }
            position, frame, detections = result
            return {
                "end_of_mission": False,
                "frame_index": position,
                "domain_id": frame.domain_id,
                "dataset_index": frame.frame_index,
                "model_version": engine.model.version,
                "preview_png_b64": _preview_png_b64(frame.pixels),
                "raw_pgm_b64": base64.b64encode(pgm16_bytes(frame.pixels)).decode("ascii"),
                "detections": [d.to_json() for d in detections],
                "progress": {
                    "cursor": engine.cursor,
                    "total": engine.manifest.n_frames,
                },
            }

    @app.post("/sessions/{session_id}/frames/{frame_index}/labels")
    def submit_labels(session_id: str, frame_index: int, body: LabelSubmission):
        session = _get_session(session_id)
        if session is None:
            return _error(404, "not_found", f"unknown session {session_id!r}")
        try:
            annotations = [
                Annotation(class_id=a.validated().class_id,
                           bbox=tuple(float(v) for v in a.bbox))
                for a in body.annotations
            ]
        except Exception as exc:
            return _error(422, "bad_annotation", str(exc))
        with session.lock:
            try:
                ack = session.engine.submit_labels(frame_index, annotations)
            except OrderingError as exc:
                return _error(409, "ordering", str(exc))
        return ack

    @app.get("/sessions/{session_id}/metrics")
    def session_metrics(session_id: str):
        session = _get_session(session_id)
        if session is None:
            return _error(404, "not_found", f"unknown session {session_id!r}")
        with session.lock:
            metrics = session.engine.metrics()
        metrics["session_id"] = session_id
        metrics["mission_id"] = session.mission_id
        metrics["policy"] = session.policy_label
        return metrics

    app.state.flush_sessions = flush_sessions
    app.state.sessions = state["sessions"]
    return app


def openapi_schema() -> dict:
    """The API schema as shipped in docs/api-schema.json."""
    return create_app().openapi()
