"""Seafloor height fields for each terrain recipe. Heights are in meters."""

import numpy as np
from scipy.ndimage import gaussian_filter

from ..errors import ParameterError
from ..frames import RESOLUTION_M
from ..seeding import rng_for
from .recipes import Cluttered, Flat, Ripples, Rocky, recipe_tag

# m^2 covered by one frame pixel, used to turn clutter density into a count
_PIXEL_AREA_M2 = RESOLUTION_M * RESOLUTION_M


def _band_limited_noise(rng, size, sigma_px: float) -> np.ndarray:
    """Low-pass filtered white noise, normalized to unit RMS."""
    field = gaussian_filter(rng.standard_normal(size), sigma=sigma_px, mode="wrap")
    rms = field.std()
    return field / rms if rms > 0 else field


def generate_terrain_heightmap(recipe, seed: int, size=(500, 1000)) -> np.ndarray:
    """Deterministic height grid for (recipe, seed)."""
    rows, cols = size
    if rows < 1 or cols < 1:
        raise ParameterError(f"bad heightmap size {size}")
    rng = rng_for("terrain", recipe_tag(recipe), seed)

    if isinstance(recipe, Flat):
        return np.zeros((rows, cols), dtype=np.float32)

    if isinstance(recipe, Ripples):
        theta = np.deg2rad(recipe.orientation_deg)
        y, x = np.mgrid[0:rows, 0:cols]
        phase0 = rng.uniform(0.0, 2.0 * np.pi)
        carrier = np.sin(2.0 * np.pi * recipe.frequency * (x * np.cos(theta) + y * np.sin(theta)) + phase0)
        jitter = 0.04 * _band_limited_noise(rng, (rows, cols), sigma_px=4.0)
        return (recipe.amplitude * (carrier + jitter)).astype(np.float32)

    if isinstance(recipe, Rocky):
        field = _band_limited_noise(rng, (rows, cols), sigma_px=8.0)
        return (recipe.roughness * field).astype(np.float32)

    if isinstance(recipe, Cluttered):
        base = 0.03 * _band_limited_noise(rng, (rows, cols), sigma_px=6.0)
        height = base.astype(np.float64)
        frame_area_m2 = rows * cols * _PIXEL_AREA_M2
        count = int(round(recipe.density * frame_area_m2 / 100.0))
        for _ in range(count):
            r = rng.uniform(10, rows - 10)
            c = rng.uniform(10, cols - 10)
            radius_px = rng.uniform(4.0, 10.0)
            peak = rng.uniform(0.10, 0.22)
            half = int(np.ceil(3 * radius_px / 2))
            r0, r1 = max(0, int(r) - half), min(rows, int(r) + half + 1)
            c0, c1 = max(0, int(c) - half), min(cols, int(c) + half + 1)
            yy, xx = np.mgrid[r0:r1, c0:c1]
            d2 = (yy - r) ** 2 + (xx - c) ** 2
            sigma2 = (radius_px / 2.0) ** 2
            height[r0:r1, c0:c1] += peak * np.exp(-d2 / (2.0 * sigma2))
        return height.astype(np.float32)

    raise ParameterError(f"unknown recipe type {type(recipe).__name__}")
