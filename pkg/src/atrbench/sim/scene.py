"""Objects of interest: height-field stamps, placement, and annotation geometry.

Objects sit on the seafloor and are imaged as a bright highlight followed
(down-range) by an acoustic shadow. The annotation box covers both. Nominal
sizes and the placement band are chosen so that every annotation box stays
comparable to the detector's 64x64 patch at evaluation IoU 0.5.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..boxes import box_inside
from ..errors import ParameterError
from ..frames import CLASS_NAMES, FRAME_HEIGHT, FRAME_WIDTH, RESOLUTION_M, Annotation
from ..seeding import rng_for

SENSOR_ALTITUDE_M = 9.0
NEAR_RANGE_M = 3.0  # ground range at column 0

# nominal object dimensions in meters (multiplied by the per-object scale)
CONE_RADIUS = 1.15
CONE_HEIGHT = 0.58
CYL_LENGTH = 2.9
CYL_RADIUS = 0.60
WEDGE_LONG = 2.7
WEDGE_SHORT = 1.6
WEDGE_HEIGHT = 0.60

SCALE_RANGE = (0.95, 1.10)
ORIENT_RANGE = (75.0, 105.0)   # long axis kept near across-track
PLACEMENT_COLS = (240, 520)    # keeps shadows bounded at far range
PLACEMENT_ROWS = (60, 440)
MIN_SEPARATION_PX = 150.0

_FOOTPRINT_EPS = 0.02  # m; height above which a pixel counts as object footprint


@dataclass(frozen=True)
class ObjectSpec:
    class_id: str
    row: float    # along-track center, pixels
    col: float    # range center, pixels
    scale: float
    orientation_deg: float

    def __post_init__(self):
        if self.class_id not in CLASS_NAMES:
            raise ParameterError(f"unknown object class {self.class_id!r}")
        if self.scale <= 0:
            raise ParameterError("scale must be positive")


def ground_range_m(col) -> float:
    return NEAR_RANGE_M + np.asarray(col, dtype=np.float64) * RESOLUTION_M


def object_heightfield(spec: ObjectSpec):
    """Local height patch (meters) and its top-left (row0, col0) placement."""
    s = spec.scale
    theta = math.radians(spec.orientation_deg)
    # generous local window: covers any rotation of the largest footprint
    half_m = max(CONE_RADIUS, CYL_LENGTH / 2, WEDGE_LONG / 2) * s + 0.3
    half_px = int(math.ceil(half_m / RESOLUTION_M))
    r0 = int(round(spec.row)) - half_px
    c0 = int(round(spec.col)) - half_px
    n = 2 * half_px + 1
    yy, xx = np.mgrid[0:n, 0:n]
    dy = (yy - half_px) * RESOLUTION_M
    dx = (xx - half_px) * RESOLUTION_M

    if spec.class_id == "cone":
        rad = np.hypot(dx, dy)
        h = CONE_HEIGHT * s * np.clip(1.0 - rad / (CONE_RADIUS * s), 0.0, None)
    else:
        u = dx * math.cos(theta) + dy * math.sin(theta)
        v = -dx * math.sin(theta) + dy * math.cos(theta)
        if spec.class_id == "cylinder":
            half_len = CYL_LENGTH * s / 2
            radius = CYL_RADIUS * s
            inside = (np.abs(u) <= half_len) & (np.abs(v) <= radius)
            h = np.where(inside, np.sqrt(np.clip(radius**2 - v**2, 0.0, None)), 0.0)
        else:  # wedge: triangular prism ramping across its short side
            half_a = WEDGE_LONG * s / 2
            half_b = WEDGE_SHORT * s / 2
            inside = (np.abs(u) <= half_a) & (np.abs(v) <= half_b)
            ramp = (v + half_b) / (2 * half_b)
            h = np.where(inside, WEDGE_HEIGHT * s * np.clip(ramp, 0.0, 1.0), 0.0)
    return h.astype(np.float32), r0, c0


def shadow_length_px(peak_height_m: float, far_col: float) -> int:
    """Length of the cast shadow beyond the object's down-range edge."""
    x_far = float(ground_range_m(far_col))
    length_m = peak_height_m * x_far / (SENSOR_ALTITUDE_M - peak_height_m)
    return int(math.ceil(length_m / RESOLUTION_M))


def annotation_for(spec: ObjectSpec) -> Annotation:
    """Ground-truth box covering the object footprint plus its cast shadow."""
    h, r0, c0 = object_heightfield(spec)
    mask = h > _FOOTPRINT_EPS
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if len(rows) == 0:
        raise ParameterError("object footprint is empty")
    y0, y1 = r0 + rows[0], r0 + rows[-1]
    x0, x1 = c0 + cols[0], c0 + cols[-1]
    x1 += shadow_length_px(float(h.max()), x1)
    return Annotation(
        class_id=spec.class_id,
        bbox=(int(x0), int(y0), int(x1 - x0 + 1), int(y1 - y0 + 1)),
    )


def _draw_spec(rng) -> ObjectSpec:
    class_id = CLASS_NAMES[rng.integers(len(CLASS_NAMES))]
    return ObjectSpec(
        class_id=class_id,
        row=int(rng.integers(PLACEMENT_ROWS[0], PLACEMENT_ROWS[1] + 1)),
        col=int(rng.integers(PLACEMENT_COLS[0], PLACEMENT_COLS[1] + 1)),
        scale=float(rng.uniform(*SCALE_RANGE)),
        orientation_deg=float(
            rng.uniform(0.0, 360.0) if class_id == "cone" else rng.uniform(*ORIENT_RANGE)
        ),
    )


def insert_objects(domain, frame_budget: int, object_rate: float = 0.2,
                   seed: int = 0) -> dict:
    """Choose which frames carry objects and where; exactly round(rate * budget)
    frames receive at least one object."""
    if not 0.0 <= object_rate <= 1.0:
        raise ParameterError("object_rate must lie in [0, 1]")
    if frame_budget < 0:
        raise ParameterError("frame_budget must be >= 0")
    rng = rng_for("objects", domain.domain_id, seed)
    k = int(round(object_rate * frame_budget))
    chosen = sorted(rng.choice(frame_budget, size=k, replace=False)) if k else []
    placements = {}
    for frame_index in chosen:
        count = 1 + int(rng.random() < 0.2)
        specs = []
        attempts = 0
        while len(specs) < count and attempts < 80:
            attempts += 1
            spec = _draw_spec(rng)
            ann = annotation_for(spec)
            if not box_inside(ann.bbox, FRAME_WIDTH, FRAME_HEIGHT):
                continue
            if any(
                (spec.row - other.row) ** 2 + (spec.col - other.col) ** 2
                < MIN_SEPARATION_PX**2
                for other in specs
            ):
                continue
            specs.append(spec)
        placements[int(frame_index)] = specs
    return placements
