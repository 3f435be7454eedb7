"""Missions: ordered frame sequences drawn from one or more domains."""

import json
from dataclasses import dataclass, field

from ..errors import ParameterError, StorageError
from ..seeding import rng_for

MISSION_FRAMES_MIN = 100
MISSION_FRAMES_MAX = 200


@dataclass
class MissionManifest:
    mission_id: str
    frame_refs: list = field(default_factory=list)   # [(domain_id, frame_index)]
    segments: list = field(default_factory=list)     # [(domain_id, start, length)]

    @property
    def n_frames(self) -> int:
        return len(self.frame_refs)

    @property
    def is_single_domain(self) -> bool:
        return len(self.segments) == 1

    def validate(self):
        total = sum(length for _, _, length in self.segments)
        if total != self.n_frames:
            raise ParameterError("segment lengths do not cover the mission")
        for domain_id, start, length in self.segments:
            for pos in range(start, start + length):
                if self.frame_refs[pos][0] != domain_id:
                    raise ParameterError(f"segment {domain_id} does not match frame_refs")

    def to_json(self) -> dict:
        return {
            "mission_id": self.mission_id,
            "frame_refs": [[d, int(i)] for d, i in self.frame_refs],
            "segments": [[d, int(s), int(l)] for d, s, l in self.segments],
        }

    @classmethod
    def from_json(cls, obj) -> "MissionManifest":
        manifest = cls(
            mission_id=obj["mission_id"],
            frame_refs=[(d, int(i)) for d, i in obj["frame_refs"]],
            segments=[(d, int(s), int(l)) for d, s, l in obj["segments"]],
        )
        manifest.validate()
        return manifest


def save_mission(manifest: MissionManifest, path):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest.to_json(), fh, indent=1)
            fh.write("\n")
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def load_mission(path) -> MissionManifest:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return MissionManifest.from_json(json.load(fh))
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc


def _segment_lengths(n_frames: int, n_segments: int):
    base, extra = divmod(n_frames, n_segments)
    return [base + 1 if i < extra else base for i in range(n_segments)]


def generate_mission(domain_pool, n_frames: int, n_segments: int, object_rate: float,
                     seed: int, store, mission_id: str | None = None) -> MissionManifest:
    """Split n_frames into contiguous same-domain runs over distinct domains.

    Within each run, round(object_rate * length) frames are drawn from the
    domain's object-bearing frames and the rest from its empty frames, all
    without replacement, in seeded shuffled order.
    """
    pool = sorted(set(domain_pool))
    if n_segments < 1:
        raise ParameterError("n_segments must be >= 1")
    if len(pool) < n_segments:
        raise ParameterError(
            f"domain pool has {len(pool)} domains, need at least {n_segments}"
        )
    if not MISSION_FRAMES_MIN <= n_frames <= MISSION_FRAMES_MAX:
        raise ParameterError(
            f"n_frames must lie in [{MISSION_FRAMES_MIN}, {MISSION_FRAMES_MAX}]"
        )
    if not 0.0 <= object_rate <= 1.0:
        raise ParameterError("object_rate must lie in [0, 1]")

    rng = rng_for("mission", seed, n_frames, n_segments)
    chosen = [pool[int(i)] for i in rng.choice(len(pool), size=n_segments, replace=False)]
    lengths = _segment_lengths(n_frames, n_segments)

    frame_refs, segments = [], []
    cursor = 0
    for domain_id, length in zip(chosen, lengths):
        n_obj = int(round(object_rate * length))
        obj_avail = store.object_frames(domain_id)
        empty_avail = store.empty_frames(domain_id)
        if n_obj > len(obj_avail) or length - n_obj > len(empty_avail):
            raise ParameterError(
                f"domain {domain_id} cannot supply {length} frames at rate {object_rate}"
            )
        picked_obj = [obj_avail[int(i)] for i in rng.choice(len(obj_avail), n_obj, replace=False)]
        picked_empty = [
            empty_avail[int(i)]
            for i in rng.choice(len(empty_avail), length - n_obj, replace=False)
        ]
        indices = picked_obj + picked_empty
        rng.shuffle(indices)
        frame_refs.extend((domain_id, int(i)) for i in indices)
        segments.append((domain_id, cursor, length))
        cursor += length

    manifest = MissionManifest(
        mission_id=mission_id or f"m{seed}",
        frame_refs=frame_refs,
        segments=segments,
    )
    manifest.validate()
    return manifest
