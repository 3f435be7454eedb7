"""Frame rendering: slope shading, range-profile shadow casting, speckle noise.

Shadowing is a 1-D occlusion test per along-track row: a pixel is lit only if
the ray from the (elevated, near-range) sensor clears every up-range height.
Flat-field normalization divides by the flat-floor response so a featureless
seabed renders at a uniform base level.
"""

import numpy as np

from ..errors import ParameterError
from ..frames import FRAME_HEIGHT, FRAME_WIDTH, Annotation, SonarFrame, quantize16
from ..seeding import rng_for
from .scene import SENSOR_ALTITUDE_M, annotation_for, ground_range_m, object_heightfield

BASE_LEVEL = 0.35        # background intensity of a flat, noise-free floor
OBJECT_ALBEDO = 1.6      # reflectivity boost on object footprints
SHADOW_FACTOR = 0.12     # shadow intensity relative to the base level
NOISE_SIGMA_STEP = 0.05  # speckle sigma increment per noise level


def speckle_sigma(noise_level: int) -> float:
    """Multiplicative speckle strength ladder; level 0 is noise-free."""
    if not 0 <= noise_level <= 7:
        raise ParameterError(f"noise_level must lie in [0, 7], got {noise_level}")
    return NOISE_SIGMA_STEP * noise_level


def shade_and_shadow(height: np.ndarray) -> np.ndarray:
    """Reflectivity relative to a flat floor, with occluded pixels zeroed out;
    returns (shade, lit) arrays."""
    rows, cols = height.shape
    x = ground_range_m(np.arange(cols))[None, :]
    h = height.astype(np.float64)
    slope = np.gradient(h, axis=1) / 0.05  # dh/dx with 5 cm pixels

    num = x * slope + SENSOR_ALTITUDE_M - h
    illum = np.clip(num, 0.0, None) / (
        np.sqrt(1.0 + slope**2) * np.hypot(x, SENSOR_ALTITUDE_M - h)
    )
    illum_flat = SENSOR_ALTITUDE_M / np.hypot(x, SENSOR_ALTITUDE_M)
    shade = illum / illum_flat

    depression = (h - SENSOR_ALTITUDE_M) / x
    horizon = np.maximum.accumulate(depression, axis=1)
    lit = depression >= horizon - 1e-12
    return shade, lit


def render_frame(heightmap: np.ndarray, objects, noise_level: int, seed: int,
                 domain_id: str = "", frame_index: int = 0) -> SonarFrame:
    """Render a frame from terrain plus objects and annotate the objects."""
    if heightmap.shape != (FRAME_HEIGHT, FRAME_WIDTH):
        raise ParameterError(
            f"heightmap must be {FRAME_HEIGHT}x{FRAME_WIDTH}, got {heightmap.shape}"
        )
    sigma = speckle_sigma(noise_level)

    height = heightmap.astype(np.float64).copy()
    albedo = np.ones_like(height)
    annotations: list[Annotation] = []
    for spec in objects:
        ann = annotation_for(spec)
        x, y, w, hgt = ann.bbox
        if x < 0 or y < 0 or x + w > FRAME_WIDTH or y + hgt > FRAME_HEIGHT:
            raise ParameterError(
                f"object at ({spec.row}, {spec.col}) does not fit: bbox {ann.bbox}"
            )
        patch, r0, c0 = object_heightfield(spec)
        pr0, pc0 = max(0, r0), max(0, c0)
        pr1 = min(FRAME_HEIGHT, r0 + patch.shape[0])
        pc1 = min(FRAME_WIDTH, c0 + patch.shape[1])
        local = patch[pr0 - r0 : pr1 - r0, pc0 - c0 : pc1 - c0]
        height[pr0:pr1, pc0:pc1] += local
        albedo[pr0:pr1, pc0:pc1][local > 0.02] = OBJECT_ALBEDO
        annotations.append(ann)

    shade, lit = shade_and_shadow(height)
    intensity = np.where(
        lit, BASE_LEVEL * albedo * shade, BASE_LEVEL * SHADOW_FACTOR
    )

    if sigma > 0:
        rng = rng_for("speckle", domain_id, frame_index, noise_level, seed)
        intensity = intensity * (1.0 + sigma * rng.standard_normal(intensity.shape))

    return SonarFrame(
        pixels=quantize16(intensity),
        domain_id=domain_id,
        frame_index=frame_index,
        annotations=annotations,
    )
