"""Rendering: shading, highlight/shadow phenomenology, speckle ladder."""

import numpy as np
import pytest

from atrbench.errors import ParameterError
from atrbench.sim import generate_terrain_heightmap, render_frame, speckle_sigma
from atrbench.sim.recipes import Flat
from atrbench.sim.scene import ObjectSpec, annotation_for, object_heightfield


def flat_map():
    return generate_terrain_heightmap(Flat(), seed=0, size=(500, 1000))


def test_flat_noise_free_frame_is_near_uniform():
    frame = render_frame(flat_map(), [], noise_level=0, seed=3, domain_id="t")
    assert frame.pixels.shape == (500, 1000)
    assert frame.pixels.std() <= 0.01 * frame.pixels.mean()


def test_speckle_ladder_has_eight_distinct_levels():
    sigmas = [speckle_sigma(l) for l in range(8)]
    assert len(set(sigmas)) == 8
    assert sigmas == sorted(sigmas)
    assert sigmas[0] == 0.0
    with pytest.raises(ParameterError):
        speckle_sigma(8)
    with pytest.raises(ParameterError):
        speckle_sigma(-1)


def test_highlight_and_shadow_phenomenology():
    spec = ObjectSpec(class_id="cylinder", row=250, col=400, scale=1.0,
                      orientation_deg=90.0)
    frame = render_frame(flat_map(), [spec], noise_level=0, seed=3, domain_id="t")
    assert len(frame.annotations) == 1
    ann = frame.annotations[0]
    x, y, w, h = ann.bbox

    background = np.concatenate(
        [frame.pixels[:, :300].ravel(), frame.pixels[:, 700:].ravel()]
    )
    patch, r0, c0 = object_heightfield(spec)
    mask = patch > 0.02
    footprint = frame.pixels[r0 : r0 + patch.shape[0], c0 : c0 + patch.shape[1]][mask]
    assert footprint.mean() > background.mean()

    foot_right = c0 + int(np.flatnonzero(mask.any(axis=0))[-1])
    shadow = frame.pixels[y : y + h, foot_right + 3 : x + w]
    assert shadow.mean() < 0.5 * background.mean()
    assert foot_right + 3 > 400  # shadow is strictly down-range of the object


def test_annotation_covers_highlight_and_shadow():
    spec = ObjectSpec(class_id="cone", row=200, col=300, scale=1.0, orientation_deg=0.0)
    ann = annotation_for(spec)
    patch, r0, c0 = object_heightfield(spec)
    mask = patch > 0.02
    foot_right = c0 + int(np.flatnonzero(mask.any(axis=0))[-1])
    x, y, w, h = ann.bbox
    assert x + w > foot_right  # extends past the footprint, down-range
    centroid_col = c0 + float(np.flatnonzero(mask.any(axis=0)).mean())
    assert x + w > centroid_col  # shadow side strictly down-range of the centroid


def test_noise_level_raises_variance_monotonically():
    heightmap = flat_map()
    variances = []
    for level in (0, 3, 7):
        per_seed = [
            render_frame(heightmap, [], level, seed=s, domain_id="t").pixels.var()
            for s in range(10)
        ]
        variances.append(np.mean(per_seed))
    assert variances[0] < variances[1] < variances[2]


def test_noise_level_out_of_range_rejected():
    with pytest.raises(ParameterError):
        render_frame(flat_map(), [], noise_level=9, seed=0)


def test_object_out_of_frame_rejected():
    spec = ObjectSpec(class_id="cone", row=10, col=980, scale=1.0, orientation_deg=0.0)
    with pytest.raises(ParameterError):
        render_frame(flat_map(), [spec], noise_level=0, seed=0)


def test_render_is_deterministic():
    spec = ObjectSpec(class_id="wedge", row=300, col=350, scale=1.05,
                      orientation_deg=80.0)
    a = render_frame(flat_map(), [spec], 5, seed=4, domain_id="t", frame_index=2)
    b = render_frame(flat_map(), [spec], 5, seed=4, domain_id="t", frame_index=2)
    assert np.array_equal(a.pixels, b.pixels)


def test_pixels_are_quantized_16bit():
    frame = render_frame(flat_map(), [], noise_level=6, seed=1, domain_id="t")
    scaled = frame.pixels * 65535.0
    assert np.allclose(scaled, np.round(scaled), atol=1e-3)
    assert frame.pixels.min() >= 0.0 and frame.pixels.max() <= 1.0
