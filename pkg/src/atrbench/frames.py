"""Core frame and annotation types shared by the simulator, features, and detector."""

from dataclasses import dataclass, field

import numpy as np

from .boxes import box_inside
from .errors import ParameterError

FRAME_WIDTH = 1000   # range axis, columns
FRAME_HEIGHT = 500   # along-track axis, rows
RESOLUTION_M = 0.05  # square pixels

CLASS_NAMES = ("cone", "cylinder", "wedge")


@dataclass(frozen=True)
class Annotation:
    """One labeled object: class plus a box covering highlight and shadow."""

    class_id: str
    bbox: tuple  # (x, y, w, h) in pixels

    def __post_init__(self):
        if self.class_id not in CLASS_NAMES:
            raise ParameterError(f"unknown class {self.class_id!r}")
        x, y, w, h = self.bbox
        if w <= 0 or h <= 0:
            raise ParameterError(f"degenerate bbox {self.bbox}")

    def to_json(self):
        return {"class": self.class_id, "bbox": [int(v) for v in self.bbox]}

    @classmethod
    def from_json(cls, obj):
        return cls(class_id=obj["class"], bbox=tuple(obj["bbox"]))


@dataclass
class SonarFrame:
    """One sidescan intensity image with provenance and ground-truth annotations.

    Pixels are float32 in [0, 1], already quantized to 16-bit steps so that a
    PGM round trip is lossless.
    """

    pixels: np.ndarray
    domain_id: str
    frame_index: int
    annotations: list = field(default_factory=list)
    resolution_m: float = RESOLUTION_M

    def __post_init__(self):
        if self.pixels.shape != (FRAME_HEIGHT, FRAME_WIDTH):
            raise ParameterError(
                f"frame must be {FRAME_HEIGHT}x{FRAME_WIDTH}, got {self.pixels.shape}"
            )
        for ann in self.annotations:
            if not box_inside(ann.bbox, FRAME_WIDTH, FRAME_HEIGHT):
                raise ParameterError(f"annotation {ann.bbox} extends outside the frame")

    @property
    def key(self):
        return (self.domain_id, self.frame_index)


def quantize16(values: np.ndarray) -> np.ndarray:
    """Clip to [0, 1] and snap to the 16-bit grid used for storage."""
    q = np.round(np.clip(values, 0.0, 1.0) * 65535.0)
    return (q / 65535.0).astype(np.float32)
