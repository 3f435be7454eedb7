"""Snippets, autoencoder training, bin fitting, and frame signatures."""

import numpy as np
import pytest

from atrbench.errors import DivergenceError, ParameterError, StateError
from atrbench.features import (
    FeatureConfig,
    build_distribution,
    encode,
    encode_batch,
    fit_bin_ranges,
    histogram_features,
    init_autoencoder,
    load_autoencoder,
    reconstruction_mse,
    sample_snippets,
    save_autoencoder,
    train_autoencoder,
)
from atrbench.frames import SonarFrame, quantize16


def frame_from(pixels, domain="d0", index=0):
    return SonarFrame(pixels=quantize16(pixels), domain_id=domain, frame_index=index)


@pytest.fixture(scope="module")
def textured_frame():
    rng = np.random.default_rng(0)
    base = 0.4 + 0.1 * rng.standard_normal((500, 1000))
    return frame_from(base.astype(np.float32))


# ------------------------------------------------------------- snippets

def test_snippets_are_in_bounds_and_right_shape(textured_frame):
    snippets = sample_snippets(textured_frame, 32, seed=0)
    assert snippets.shape == (32, 128, 128)


def test_snippet_positions_deterministic_per_frame_identity(textured_frame):
    a = sample_snippets(textured_frame, 8, seed=3)
    b = sample_snippets(textured_frame, 8, seed=3)
    assert np.array_equal(a, b)
    other = SonarFrame(pixels=textured_frame.pixels, domain_id="d1", frame_index=0)
    c = sample_snippets(other, 8, seed=3)
    assert not np.array_equal(a, c)  # identity feeds the position stream


def test_constant_frame_gives_constant_snippet():
    frame = frame_from(np.full((500, 1000), 0.25, dtype=np.float32))
    snip = sample_snippets(frame, 1, seed=0)[0]
    assert np.unique(snip).size == 1


def test_small_frame_rejected():
    small = SonarFrame.__new__(SonarFrame)  # bypass frame-size validation
    small.pixels = np.zeros((100, 100), dtype=np.float32)
    small.domain_id, small.frame_index = "d", 0
    with pytest.raises(ParameterError):
        sample_snippets(small, 4, seed=0)


# ------------------------------------------------------------- autoencoder

def corpus_from(rng, n=400):
    # mix of smooth and speckled textures at sonar-like intensity levels
    levels = 0.35 + 0.1 * (rng.random((n // 2, 1, 1)) - 0.5)
    smooth = levels * np.ones((n // 2, 128, 128))
    speckle = 0.4 + 0.12 * rng.standard_normal((n - n // 2, 128, 128))
    return np.clip(np.concatenate([smooth, speckle]), 0, 1).astype(np.float32)


def test_training_reduces_reconstruction_error(rng):
    corpus = corpus_from(rng, 500)
    model = train_autoencoder(corpus, epochs=20, learning_rate=1e-3, seed=0)
    curve = model.metadata["heldout_curve"]
    assert curve[-1] < curve[0]


def test_heldout_curve_non_increasing_within_tolerance(rng):
    corpus = corpus_from(rng, 400)
    model = train_autoencoder(corpus, epochs=10, learning_rate=1e-3, seed=1)
    curve = model.metadata["heldout_curve"]
    for before, after in zip(curve, curve[1:]):
        assert after <= before * 1.05


def test_constant_corpus_reaches_near_zero_mse():
    corpus = np.full((64, 128, 128), 0.5, dtype=np.float32)
    model = train_autoencoder(corpus, epochs=20, learning_rate=1e-2, seed=2)
    assert model.metadata["final_loss"] < 1e-4
    assert reconstruction_mse(model, corpus) < 1e-4


def test_zero_epochs_returns_initialization(rng):
    corpus = corpus_from(rng, 64)
    trained = train_autoencoder(corpus, epochs=0, learning_rate=1e-3, seed=5)
    fresh = init_autoencoder(5)
    assert np.array_equal(trained.w_enc, fresh.w_enc)
    assert np.array_equal(trained.b_enc, fresh.b_enc)
    assert np.array_equal(trained.w_dec, fresh.w_dec)
    assert np.array_equal(trained.b_dec, fresh.b_dec)


def test_training_is_deterministic(rng):
    corpus = corpus_from(rng, 200)
    a = train_autoencoder(corpus, epochs=3, learning_rate=1e-3, seed=7)
    b = train_autoencoder(corpus, epochs=3, learning_rate=1e-3, seed=7)
    assert np.array_equal(a.w_enc, b.w_enc)
    assert np.array_equal(a.b_dec, b.b_dec)


def test_divergence_raises_named_epoch(rng):
    corpus = corpus_from(rng, 200)
    with pytest.raises(DivergenceError):
        train_autoencoder(corpus, epochs=3, learning_rate=50.0, seed=0)


def test_encode_contract(rng):
    corpus = corpus_from(rng, 128)
    model = train_autoencoder(corpus, epochs=2, learning_rate=1e-3, seed=0)
    vec = encode(model, corpus[0])
    assert vec.shape == (64,)
    assert np.isfinite(vec).all()
    assert np.array_equal(vec, encode(model, corpus[0]))
    with pytest.raises(ParameterError):
        encode(model, np.zeros((64, 64)))
    with pytest.raises(ParameterError):
        encode(model, np.full((128, 128), 2.0))


def test_autoencoder_roundtrip(tmp_path, rng):
    corpus = corpus_from(rng, 128)
    model = train_autoencoder(corpus, epochs=2, learning_rate=1e-3, seed=0)
    path = tmp_path / "autoencoder.bin"
    save_autoencoder(model, path, extra_meta={"note": 1})
    loaded = load_autoencoder(path)
    assert np.array_equal(model.w_enc, loaded.w_enc)
    assert np.array_equal(model.b_dec, loaded.b_dec)
    assert loaded.metadata["note"] == 1
    assert loaded.metadata["epochs"] == 2


# ------------------------------------------------------------- bin ranges

def test_fit_bin_ranges_three_sigma_rule():
    vectors = np.zeros((1000, 64))
    vectors[500:, 0] = 1.0  # dimension 0: half zeros, half ones
    vectors[:, 1] = 3.0     # dimension 1: constant
    ranges = fit_bin_ranges(vectors)
    assert ranges[0] == pytest.approx([-1.0, 2.0], abs=1e-12)
    assert ranges[1] == pytest.approx([2.5, 3.5], abs=1e-12)
    assert (ranges[:, 0] < ranges[:, 1]).all()


def test_fit_bin_ranges_requires_two_vectors():
    with pytest.raises(ParameterError):
        fit_bin_ranges(np.zeros((1, 64)))


# ------------------------------------------------------------- distributions

def fitted_config(rng, bins=16):
    vectors = rng.standard_normal((500, 64))
    return FeatureConfig(bins_per_dim=bins).with_ranges(fit_bin_ranges(vectors))


def test_histogram_rows_sum_to_one(rng):
    config = fitted_config(rng)
    vectors = rng.standard_normal((40, 64)) * 3  # includes out-of-range values
    dist = histogram_features(vectors, config)
    assert dist.hist.shape == (64, 16)
    assert dist.hist.sum(axis=1) == pytest.approx(np.ones(64), abs=1e-9)


def test_single_vector_gives_one_hot_rows(rng):
    config = fitted_config(rng)
    dist = histogram_features(rng.standard_normal((1, 64)), config)
    assert ((dist.hist == 0) | (dist.hist == 1)).all()
    assert dist.hist.sum(axis=1) == pytest.approx(np.ones(64))


def test_outliers_clamp_to_edge_bins(rng):
    config = fitted_config(rng)
    huge = np.full((3, 64), 1e9)
    tiny = np.full((3, 64), -1e9)
    up = histogram_features(huge, config)
    down = histogram_features(tiny, config)
    assert (up.hist[:, -1] == 1.0).all()
    assert (down.hist[:, 0] == 1.0).all()


def test_unfitted_config_raises_state_error(rng, textured_frame):
    model = init_autoencoder(0)
    with pytest.raises(StateError):
        build_distribution(model, textured_frame, FeatureConfig(), seed=0)


def test_build_distribution_deterministic(rng, textured_frame):
    model = init_autoencoder(0)
    vectors = encode_batch(model, sample_snippets(textured_frame, 64, seed=0))
    config = FeatureConfig(snippets_per_frame=16).with_ranges(fit_bin_ranges(vectors))
    a = build_distribution(model, textured_frame, config, seed=4)
    b = build_distribution(model, textured_frame, config, seed=4)
    assert np.array_equal(a.hist, b.hist)
    assert a.fingerprint == b.fingerprint


def test_signature_cache_roundtrip(tmp_path, rng, textured_frame):
    from atrbench.features import load_signature, save_signature

    model = init_autoencoder(0)
    vectors = encode_batch(model, sample_snippets(textured_frame, 64, seed=0))
    config = FeatureConfig(snippets_per_frame=16).with_ranges(fit_bin_ranges(vectors))
    dist = build_distribution(model, textured_frame, config, seed=4)
    path = tmp_path / "0.sig"
    save_signature(path, dist)
    assert path.stat().st_size == 64 * 16 * 8
    loaded = load_signature(path, config)
    assert np.array_equal(loaded.hist, dist.hist)
    assert loaded.fingerprint == dist.fingerprint


def test_config_validation():
    with pytest.raises(ParameterError):
        FeatureConfig(snippet_size=64)
    with pytest.raises(ParameterError):
        FeatureConfig(bins_per_dim=1)
    bad = np.stack([np.ones(64), np.zeros(64)], axis=1)  # low >= high
    with pytest.raises(ParameterError):
        FeatureConfig(bin_ranges=bad)
