"""EMD closed form, metric properties, and similarity ranking."""

import numpy as np
import pytest
from scipy.stats import wasserstein_distance

from atrbench.distance import emd_1d, frame_distance, rank_by_similarity
from atrbench.errors import ParameterError, SignatureMismatchError
from atrbench.features.distribution import FeatureDistribution

from oracles import emd_by_mass_moving


def random_hist(rng, bins=16):
    h = rng.random(bins)
    return h / h.sum()


def make_dist(hist, widths=None, fingerprint="fp"):
    hist = np.asarray(hist, dtype=np.float64)
    if widths is None:
        widths = np.ones(hist.shape[0])
    return FeatureDistribution(hist=hist, bin_widths=widths, fingerprint=fingerprint)


def test_identical_histograms_have_zero_distance(rng):
    p = random_hist(rng)
    assert emd_1d(p, p, 1.0) == 0.0


def test_point_mass_translation():
    p = np.zeros(8)
    q = np.zeros(8)
    p[0] = 1.0
    q[4] = 1.0
    assert emd_1d(p, q, 1.0) == pytest.approx(4.0, abs=1e-12)


def test_hand_computed_cdf_case():
    p = np.array([0.5, 0.5, 0.0])
    q = np.array([0.0, 0.5, 0.5])
    # CDFs (.5, 1, 1) vs (0, .5, 1): sum of |diffs| = 1.0
    assert emd_1d(p, q, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_bin_width_scales_linearly(rng):
    p, q = random_hist(rng), random_hist(rng)
    assert emd_1d(p, q, 2.5) == pytest.approx(2.5 * emd_1d(p, q, 1.0), rel=1e-12)


def test_rejects_length_mismatch_and_unnormalized():
    with pytest.raises(ParameterError):
        emd_1d(np.ones(3) / 3, np.ones(4) / 4, 1.0)
    with pytest.raises(ParameterError):
        emd_1d(np.array([0.7, 0.7]), np.array([0.5, 0.5]), 1.0)
    with pytest.raises(ParameterError):
        emd_1d(np.array([0.5, 0.5]), np.array([1.5, -0.5]), 1.0)


def test_matches_mass_moving_oracle_and_scipy(rng):
    centers = np.arange(16) * 0.25
    for _ in range(300):
        p, q = random_hist(rng), random_hist(rng)
        ours = emd_1d(p, q, 0.25)
        assert ours == pytest.approx(emd_by_mass_moving(p, q, 0.25), abs=1e-12)
        assert ours == pytest.approx(
            wasserstein_distance(centers, centers, p, q), abs=1e-9
        )


def test_metric_properties_on_random_triples(rng):
    for _ in range(1000):
        p, q, r = (random_hist(rng) for _ in range(3))
        dpq = emd_1d(p, q, 1.0)
        dqp = emd_1d(q, p, 1.0)
        assert dpq >= 0
        assert dpq == pytest.approx(dqp, abs=1e-12)
        assert emd_1d(p, q, 1.0) + emd_1d(q, r, 1.0) >= emd_1d(p, r, 1.0) - 1e-9


def test_frame_distance_value_is_sum_of_components(rng):
    a = make_dist(np.stack([random_hist(rng) for _ in range(5)]))
    b = make_dist(np.stack([random_hist(rng) for _ in range(5)]))
    fd = frame_distance(a, b)
    assert fd.value == pytest.approx(fd.components.sum(), rel=1e-12)
    assert fd.value >= 0
    assert frame_distance(a, a).value == 0.0


def test_frame_distance_symmetry_and_componentwise_oracle(rng):
    widths = rng.random(4) + 0.5
    a = make_dist(np.stack([random_hist(rng) for _ in range(4)]), widths)
    b = make_dist(np.stack([random_hist(rng) for _ in range(4)]), widths)
    fd_ab = frame_distance(a, b)
    fd_ba = frame_distance(b, a)
    assert fd_ab.value == pytest.approx(fd_ba.value, abs=1e-12)
    for d in range(4):
        assert fd_ab.components[d] == pytest.approx(
            emd_1d(a.hist[d], b.hist[d], widths[d]), abs=1e-12
        )


def test_single_dimension_point_mass_shift_gives_width():
    base = np.zeros((3, 8))
    base[:, 0] = 1.0
    shifted = base.copy()
    shifted[1] = 0.0
    shifted[1, 1] = 1.0
    widths = np.array([1.0, 0.75, 1.0])
    fd = frame_distance(make_dist(base, widths), make_dist(shifted, widths))
    assert fd.value == pytest.approx(0.75, abs=1e-12)


def test_fingerprint_mismatch_rejected(rng):
    a = make_dist(np.stack([random_hist(rng)]), fingerprint="aa")
    b = make_dist(np.stack([random_hist(rng)]), fingerprint="bb")
    with pytest.raises(SignatureMismatchError):
        frame_distance(a, b)


def test_rank_query_in_pool_comes_first(rng):
    sigs = [make_dist(np.stack([random_hist(rng) for _ in range(3)])) for _ in range(5)]
    pool = list(zip("abcde", sigs))
    ranked = rank_by_similarity(sigs[2], pool, 3)
    assert ranked[0] == "c"


def test_rank_known_distances():
    def point_mass(bin_):
        h = np.zeros((1, 8))
        h[0, bin_] = 1.0
        return make_dist(h)

    query = point_mass(0)
    pool = [("a", point_mass(1)), ("b", point_mass(5)), ("c", point_mass(3))]
    assert rank_by_similarity(query, pool, 2) == ["a", "c"]


def test_rank_is_stable_under_pool_permutation(rng):
    sigs = [make_dist(np.stack([random_hist(rng) for _ in range(3)])) for _ in range(6)]
    pool = list(zip("abcdef", sigs))
    query = make_dist(np.stack([random_hist(rng) for _ in range(3)]))
    ranked = rank_by_similarity(query, pool, 6)
    shuffled = [pool[i] for i in [3, 1, 5, 0, 4, 2]]
    assert rank_by_similarity(query, shuffled, 6) == ranked
    assert sorted(ranked) == list("abcdef")


def test_rank_ties_break_by_ascending_id(rng):
    sig = make_dist(np.stack([random_hist(rng)]))
    same = make_dist(sig.hist.copy())
    pool = [("z", same), ("a", same), ("m", same)]
    assert rank_by_similarity(sig, pool, 3) == ["a", "m", "z"]


def test_rank_k_larger_than_pool_returns_whole_pool(rng):
    sigs = [make_dist(np.stack([random_hist(rng)])) for _ in range(3)]
    pool = list(zip("abc", sigs))
    query = make_dist(np.stack([random_hist(rng)]))
    assert len(rank_by_similarity(query, pool, 10)) == 3


def test_rank_rejects_empty_pool_and_bad_k(rng):
    query = make_dist(np.stack([random_hist(rng)]))
    with pytest.raises(ParameterError):
        rank_by_similarity(query, [], 1)
    with pytest.raises(ParameterError):
        rank_by_similarity(query, [("a", query)], 0)
