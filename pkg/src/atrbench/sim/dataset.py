"""On-disk dataset layout and loaders.

Layout per domain under a world root:
    <root>/grid.json                          domain table
    <root>/<domain_id>/frames/<index>.pgm     16-bit big-endian binary PGM
    <root>/<domain_id>/annotations.json       frame index -> [{class, bbox}]
Only object-bearing frames appear in annotations.json.
"""

import json
import os
from collections import OrderedDict

import numpy as np

from ..errors import ParameterError, StorageError
from ..frames import FRAME_HEIGHT, FRAME_WIDTH, Annotation, SonarFrame
from ..seeding import derive_seed
from .grid import DomainSpec
from .heightmap import generate_terrain_heightmap
from .render import render_frame
from .scene import insert_objects


def pgm16_bytes(values01: np.ndarray) -> bytes:
    """[0, 1] floats as a 16-bit big-endian binary PGM byte string."""
    data = np.round(np.clip(values01, 0.0, 1.0) * 65535.0).astype(">u2")
    height, width = data.shape
    return f"P5\n{width} {height}\n65535\n".encode("ascii") + data.tobytes()


def write_pgm16(path, values01: np.ndarray):
    """Write [0, 1] floats as a 16-bit big-endian binary PGM."""
    try:
        with open(path, "wb") as fh:
            fh.write(pgm16_bytes(values01))
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def read_pgm16(path) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    if not raw.startswith(b"P5"):
        raise StorageError(f"{path}: not a binary PGM")
    parts = raw.split(b"\n", 3)
    width, height = (int(v) for v in parts[1].split())
    maxval = int(parts[2])
    if maxval != 65535:
        raise StorageError(f"{path}: expected 16-bit PGM, maxval={maxval}")
    pixels = np.frombuffer(parts[3], dtype=">u2", count=width * height)
    return (pixels.reshape(height, width).astype(np.float32)) / 65535.0


def domain_dir(root, domain_id: str) -> str:
    return os.path.join(root, domain_id)


def frame_path(root, domain_id: str, index: int) -> str:
    return os.path.join(root, domain_id, "frames", f"{index}.pgm")


def generate_domain_dataset(domain: DomainSpec, n_frames: int, seed: int, root,
                            object_rate: float = 0.2) -> dict:
    """Render and write one domain's frames and annotation index."""
    if n_frames < 1:
        raise ParameterError("n_frames must be >= 1")
    placements = insert_objects(domain, n_frames, object_rate, seed)
    frames_dir = os.path.join(domain_dir(root, domain.domain_id), "frames")
    os.makedirs(frames_dir, exist_ok=True)
    annotations = {}
    n_objects = 0
    for index in range(n_frames):
        terrain = generate_terrain_heightmap(
            domain.recipe, derive_seed("terrain", domain.domain_id, seed, index),
            size=(FRAME_HEIGHT, FRAME_WIDTH),
        )
        frame = render_frame(
            terrain, placements.get(index, []), domain.noise_level,
            seed, domain_id=domain.domain_id, frame_index=index,
        )
        write_pgm16(frame_path(root, domain.domain_id, index), frame.pixels)
        if frame.annotations:
            annotations[str(index)] = [a.to_json() for a in frame.annotations]
            n_objects += len(frame.annotations)
    ann_path = os.path.join(domain_dir(root, domain.domain_id), "annotations.json")
    ordered = {k: annotations[k] for k in sorted(annotations, key=int)}
    try:
        with open(ann_path, "w", encoding="utf-8") as fh:
            json.dump(ordered, fh, indent=1)
            fh.write("\n")
    except OSError as exc:
        raise StorageError(f"cannot write {ann_path}: {exc}") from exc
    return {
        "domain_id": domain.domain_id,
        "frames": n_frames,
        "object_frames": len(annotations),
        "objects": n_objects,
    }


def load_annotations(root, domain_id: str) -> dict:
    path = os.path.join(domain_dir(root, domain_id), "annotations.json")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    return {int(k): [Annotation.from_json(a) for a in v] for k, v in raw.items()}


def load_frame(root, domain_id: str, index: int, annotations=None) -> SonarFrame:
    if annotations is None:
        annotations = load_annotations(root, domain_id).get(index, [])
    pixels = read_pgm16(frame_path(root, domain_id, index))
    return SonarFrame(
        pixels=pixels, domain_id=domain_id, frame_index=index, annotations=annotations
    )


def write_grid(root, grid):
    os.makedirs(root, exist_ok=True)
    path = os.path.join(root, "grid.json")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"domains": [d.to_json() for d in grid]}, fh, indent=1)
            fh.write("\n")
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def read_grid(root):
    path = os.path.join(root, "grid.json")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    return [DomainSpec.from_json(d) for d in obj["domains"]]


class DatasetStore:
    """Cached read access to a world root: grid, annotations, frames."""

    def __init__(self, root, max_cached_frames: int = 64):
        self.root = root
        self.max_cached_frames = max_cached_frames
        self._annotations: dict = {}
        self._frame_counts: dict = {}
        self._frames: OrderedDict = OrderedDict()
        self._grid = None

    def grid(self):
        if self._grid is None:
            self._grid = read_grid(self.root)
        return self._grid

    def domain(self, domain_id: str) -> DomainSpec:
        for d in self.grid():
            if d.domain_id == domain_id:
                return d
        raise ParameterError(f"unknown domain {domain_id!r}")

    def annotations(self, domain_id: str) -> dict:
        if domain_id not in self._annotations:
            self._annotations[domain_id] = load_annotations(self.root, domain_id)
        return self._annotations[domain_id]

    def frame_count(self, domain_id: str) -> int:
        if domain_id not in self._frame_counts:
            frames_dir = os.path.join(domain_dir(self.root, domain_id), "frames")
            if not os.path.isdir(frames_dir):
                return 0
            self._frame_counts[domain_id] = sum(
                1 for name in os.listdir(frames_dir) if name.endswith(".pgm")
            )
        return self._frame_counts[domain_id]

    def object_frames(self, domain_id: str):
        return sorted(self.annotations(domain_id))

    def empty_frames(self, domain_id: str):
        with_objects = set(self.annotations(domain_id))
        return [i for i in range(self.frame_count(domain_id)) if i not in with_objects]

    def frame(self, domain_id: str, index: int) -> SonarFrame:
        key = (domain_id, index)
        if key in self._frames:
            self._frames.move_to_end(key)
            return self._frames[key]
        frame = load_frame(
            self.root, domain_id, index, self.annotations(domain_id).get(index, [])
        )
        self._frames[key] = frame
        if len(self._frames) > self.max_cached_frames:
            self._frames.popitem(last=False)
        return frame

    def frame_annotations(self, domain_id: str, index: int):
        return self.annotations(domain_id).get(index, [])
