"""Patch classifier: grid geometry, gradients, NMS, loss, augmentation."""

import math
import os

import numpy as np
import pytest

from atrbench.detector import (
    AUGMENT_OPS,
    Detection,
    apply_augment,
    augment,
    checkpoint_name,
    extract_patches,
    forward_logits,
    frame_loss,
    init_model,
    label_patches,
    load_model,
    loss_and_grads,
    merge_candidates,
    nms,
    patch_grid,
    predict_frame,
    save_model,
    softmax,
    train_step,
    training_patches,
)
from atrbench.errors import ParameterError
from atrbench.evaluation import compute_map
from atrbench.frames import Annotation
from atrbench.sim import build_grid, generate_terrain_heightmap, render_frame
from atrbench.sim.scene import ObjectSpec


def synthetic_frame(with_object=True, noise_level=1, seed=5, recipe_rank=2):
    grid = build_grid()
    domain = grid[recipe_rank]
    heightmap = generate_terrain_heightmap(domain.recipe, seed, (500, 1000))
    objects = []
    if with_object:
        objects = [ObjectSpec(class_id="wedge", row=230, col=390, scale=1.02,
                              orientation_deg=95.0)]
    return render_frame(heightmap, objects, noise_level, seed=seed,
                        domain_id="t", frame_index=0)


# ------------------------------------------------------------- patch grid

def test_patch_count_matches_sliding_grid_formula():
    patches, boxes = extract_patches(np.zeros((500, 1000), dtype=np.float32), 32)
    expected = (math.floor((1000 - 64) / 32) + 1) * (math.floor((500 - 64) / 32) + 1)
    assert expected == 30 * 14 == 420
    assert len(patches) == len(boxes) == expected


def test_patch_grid_single_patch_at_frame_stride():
    boxes = patch_grid(1000, 500, 1000)
    assert len(boxes) == 1 and tuple(boxes[0]) == (0, 0, 64, 64)


def test_patches_are_in_bounds_and_deterministic():
    pixels = np.random.default_rng(0).random((500, 1000)).astype(np.float32)
    _, boxes = extract_patches(pixels, 32)
    assert (boxes[:, 0] + boxes[:, 2] <= 1000).all()
    assert (boxes[:, 1] + boxes[:, 3] <= 500).all()
    _, boxes2 = extract_patches(pixels, 32)
    assert np.array_equal(boxes, boxes2)


def test_label_patches_by_overlap():
    boxes = patch_grid(32, 500, 1000)
    anns = [Annotation("cone", (320, 192, 70, 50))]
    labels = label_patches(boxes, anns)
    assert (labels > 0).sum() >= 1
    hit = boxes[labels > 0]
    # labeled patches overlap the annotation
    for x, y, w, h in hit:
        assert x < 390 and x + w > 320 and y < 242 and y + h > 192


# ------------------------------------------------------------- model basics

def test_untrained_model_predicts_uniform_and_detects_nothing():
    model = init_model(0)
    frame = synthetic_frame(with_object=True)
    logits = forward_logits(model, extract_patches(frame, 32)[0])
    probs = softmax(logits)
    assert probs == pytest.approx(np.full_like(probs, 0.25), abs=1e-6)
    assert predict_frame(model, frame) == []


def test_uniform_model_loss_is_ln4():
    model = init_model(3)
    frame = synthetic_frame(with_object=True)
    assert frame_loss(model, frame) == pytest.approx(math.log(4.0), abs=1e-9)


def test_gradients_match_finite_differences():
    model = init_model(0, dtype=np.float64)
    rng = np.random.default_rng(1)
    model.w2 += rng.standard_normal(model.w2.shape) * 0.01
    patches = rng.random((3, 64, 64))
    labels = np.array([0, 1, 3])
    _, grads = loss_and_grads(model, patches, labels)
    eps = 1e-6
    for name in ("w1", "b1", "w2", "b2"):
        weights = getattr(model, name)
        flat = weights.ravel()
        idx = rng.choice(flat.size, size=min(25, flat.size), replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            up, _ = loss_and_grads(model, patches, labels)
            flat[i] = orig - eps
            down, _ = loss_and_grads(model, patches, labels)
            flat[i] = orig
            fd = (up - down) / (2 * eps)
            an = grads[name].ravel()[i]
            assert abs(fd - an) <= 1e-4 * max(1e-8, abs(fd) + abs(an)), name


def test_training_strictly_decreases_fixed_batch_loss():
    model = init_model(0, dtype=np.float64)
    rng = np.random.default_rng(2)
    patches = rng.random((10, 64, 64))
    labels = rng.integers(0, 4, size=10)
    losses = []
    for _ in range(100):
        loss, _ = loss_and_grads(model, patches, labels)
        losses.append(loss)
        train_step(model, (patches, labels), 1e-3)
    final, _ = loss_and_grads(model, patches, labels)
    losses.append(final)
    diffs = np.diff(losses)
    assert (diffs < 1e-8).all()
    assert final < losses[0]


def test_zero_learning_rate_keeps_weights_but_bumps_version():
    model = init_model(0)
    before = {n: getattr(model, n).copy() for n in ("w1", "b1", "w2", "b2")}
    v = model.version
    rng = np.random.default_rng(3)
    train_step(model, (rng.random((4, 64, 64)), np.array([0, 1, 2, 3])), 0.0)
    assert model.version == v + 1
    for name, arr in before.items():
        assert np.array_equal(arr, getattr(model, name))


def test_version_strictly_increases():
    model = init_model(0)
    rng = np.random.default_rng(3)
    batch = (rng.random((4, 64, 64)), np.array([0, 1, 2, 3]))
    versions = [model.version]
    for _ in range(5):
        train_step(model, batch, 1e-3)
        versions.append(model.version)
    assert versions == sorted(set(versions))


# ------------------------------------------------------------- NMS and merging

def test_nms_keeps_higher_scored_of_heavy_overlap():
    a = Detection("cone", (100, 100, 64, 64), 0.9)
    b = Detection("cone", (103, 103, 64, 64), 0.8)  # IoU ~0.9 with a
    survivors = nms([a, b], 0.5)
    assert survivors == [a]


def test_merge_candidates_collapses_overlapping_pair_keeping_top_score():
    a = Detection("cone", (100, 100, 64, 64), 0.9)
    b = Detection("cone", (103, 103, 64, 64), 0.8)
    merged = merge_candidates([a, b], 0.5, 48.0)
    assert len(merged) == 1
    assert merged[0].score == 0.9


def test_nms_ignores_cross_class_overlap():
    a = Detection("cone", (100, 100, 64, 64), 0.9)
    b = Detection("wedge", (103, 103, 64, 64), 0.8)
    assert len(nms([a, b], 0.5)) == 2


def test_nms_idempotent_on_predict_output():
    frame = synthetic_frame(with_object=True)
    model = init_model(0)
    rng = np.random.default_rng(0)
    patches, labels = training_patches(frame.pixels, frame.annotations, rng,
                                       pos_cap=16, neg_count=48)
    for _ in range(150):
        train_step(model, (patches, labels), 0.05)
    dets = predict_frame(model, frame)
    assert nms(dets, 0.5) == dets


def test_predict_is_deterministic():
    frame = synthetic_frame(with_object=True)
    model = init_model(0)
    rng = np.random.default_rng(0)
    patches, labels = training_patches(frame.pixels, frame.annotations, rng,
                                       pos_cap=16, neg_count=48)
    for _ in range(60):
        train_step(model, (patches, labels), 0.05)
    assert predict_frame(model, frame) == predict_frame(model, frame)


# ------------------------------------------------------------- overfit coupling

def test_overfit_one_frame_reaches_low_loss_and_full_map():
    frame = synthetic_frame(with_object=True)
    model = init_model(0)
    rng = np.random.default_rng(0)
    patches, labels = training_patches(frame.pixels, frame.annotations, rng,
                                       pos_cap=16, neg_count=48)
    for _ in range(400):
        train_step(model, (patches, labels), 0.05)
    assert frame_loss(model, frame) < 0.05
    dets = predict_frame(model, frame)
    assert compute_map([dets], [frame.annotations]) == 1.0


# ------------------------------------------------------------- augmentation

def test_hflip_is_involution(rng):
    patch = rng.random((64, 64)).astype(np.float32)
    assert np.array_equal(apply_augment(apply_augment(patch, "hflip"), "hflip"), patch)


def test_blur_preserves_constant_patch():
    patch = np.full((64, 64), 0.42, dtype=np.float32)
    assert apply_augment(patch, "blur3") == pytest.approx(patch, abs=1e-7)


def test_blur_reduces_variance_of_speckle(rng):
    patch = (0.5 + 0.1 * rng.standard_normal((64, 64))).astype(np.float32)
    blurred = apply_augment(patch, "blur3")
    assert blurred.var() < patch.var()
    assert blurred.min() >= 0.0 and blurred.max() <= 1.0


def test_augment_draw_is_deterministic_and_in_range(rng):
    patch = rng.random((64, 64)).astype(np.float32)
    out1 = augment(patch, 123)
    out2 = augment(patch, 123)
    assert np.array_equal(out1, out2)
    assert out1.min() >= 0.0 and out1.max() <= 1.0
    drawn = {tuple(augment(patch, s).ravel()[:4]) for s in range(40)}
    assert len(drawn) > 1  # multiple ops actually get drawn


def test_all_augment_ops_preserve_shape(rng):
    patch = rng.random((64, 64)).astype(np.float32)
    for op in AUGMENT_OPS:
        assert apply_augment(patch, op).shape == (64, 64)


# ------------------------------------------------------------- checkpoints

def test_checkpoint_roundtrip(tmp_path):
    model = init_model(7)
    rng = np.random.default_rng(1)
    train_step(model, (rng.random((4, 64, 64)), np.array([0, 1, 2, 3])), 1e-3)
    path = tmp_path / checkpoint_name(model.version)
    save_model(model, path)
    assert os.path.basename(path) == "atr-1.bin"
    loaded = load_model(path)
    for name in ("w1", "b1", "w2", "b2"):
        assert np.array_equal(getattr(model, name), getattr(loaded, name))
    assert loaded.version == model.version
    assert loaded.step_count == model.step_count


def test_bad_stride_rejected():
    with pytest.raises(ParameterError):
        extract_patches(np.zeros((500, 1000), dtype=np.float32), 0)
