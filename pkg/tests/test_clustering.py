"""Weighted K-means and its initialization.

Oracles: `_lloyd_reference` is an independent textbook unweighted Lloyd
implementation; the brute-force partition search enumerates all 2-splits of a
16-point instance; D-squared seeding probabilities are enumerated exactly on
a 4-point instance.
"""

import itertools
import math
import time

import numpy as np
import pytest

from actune.clustering import ClusteringError, kmeanspp_init, weighted_kmeans


def _lloyd_reference(vectors, centroids, max_iter=200):
    """Plain unweighted Lloyd to an assignment fixed point (oracle)."""
    centroids = centroids.copy()
    assignment = None
    for _ in range(max_iter):
        d2 = ((vectors[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=-1)
        new_assignment = np.argmin(d2, axis=1)
        if assignment is not None and (new_assignment == assignment).all():
            break
        assignment = new_assignment
        for k in range(centroids.shape[0]):
            members = vectors[assignment == k]
            if members.shape[0]:
                centroids[k] = members.mean(axis=0)
    d2 = ((vectors[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=-1)
    assignment = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(vectors.shape[0]), assignment].sum())
    return assignment, centroids, inertia


def _weighted_inertia(vectors, weights, centroids, assignment):
    diffs = vectors - centroids[assignment]
    return float((weights * (diffs * diffs).sum(axis=1)).sum())


class TestKmeansppInit:
    def test_k_equals_n_covers_every_point(self):
        rng = np.random.default_rng(0)
        vectors = rng.standard_normal((8, 3))
        centroids = kmeanspp_init(vectors, 8, np.random.default_rng(1))
        found = {tuple(c) for c in centroids}
        assert found == {tuple(v) for v in vectors}

    def test_k_one_picks_a_point(self):
        rng = np.random.default_rng(0)
        vectors = rng.standard_normal((10, 2))
        c = kmeanspp_init(vectors, 1, np.random.default_rng(2))
        assert any(np.allclose(c[0], v) for v in vectors)

    def test_deterministic_under_seed(self):
        rng = np.random.default_rng(0)
        vectors = rng.standard_normal((40, 4))
        a = kmeanspp_init(vectors, 5, np.random.default_rng(77))
        b = kmeanspp_init(vectors, 5, np.random.default_rng(77))
        np.testing.assert_array_equal(a, b)

    def test_far_pairs_land_in_distinct_pairs(self):
        """D-squared enumeration on two far-separated pairs.

        Points: pair A at x=0,1; pair B at x=1000,1001.  Enumerating the
        seeding law exactly: P(both centers in one pair) = 1/4 * sum over
        first choices of d(same)^2 / sum d^2, which evaluates to ~5.0e-7.
        1000 seeds should therefore always split across pairs.
        """
        vectors = np.array([[0.0, 0.0], [1.0, 0.0], [1000.0, 0.0], [1001.0, 0.0]])
        same_pair = {0: 1, 1: 0, 2: 3, 3: 2}
        p_same = 0.0
        for first in range(4):
            d2 = ((vectors - vectors[first]) ** 2).sum(axis=1)
            p_same += 0.25 * d2[same_pair[first]] / d2.sum()
        assert p_same < 1e-6

        hits = 0
        for seed in range(1000):
            c = kmeanspp_init(vectors, 2, np.random.default_rng(seed))
            sides = {int(v[0] > 500) for v in c}
            hits += sides == {0, 1}
        assert hits / 1000 >= 1 - p_same - 1e-9  # i.e. all 1000

    def test_rejects_bad_k(self):
        vectors = np.zeros((3, 2))
        with pytest.raises(ClusteringError):
            kmeanspp_init(vectors, 0, np.random.default_rng(0))
        with pytest.raises(ClusteringError):
            kmeanspp_init(vectors, 4, np.random.default_rng(0))


class TestWeightedKmeans:
    def test_k1_closed_form(self):
        rng = np.random.default_rng(4)
        vectors = rng.standard_normal((30, 3))
        weights = rng.uniform(0.1, 2.0, size=30)
        part = weighted_kmeans(vectors, weights, 1, rng=np.random.default_rng(0))
        expected = (weights[:, None] * vectors).sum(axis=0) / weights.sum()
        np.testing.assert_allclose(part.centroids[0], expected, atol=1e-12)

    def test_equal_weights_match_unweighted_oracle(self):
        """With all weights 1 the trajectory must equal textbook Lloyd."""
        rng = np.random.default_rng(10)
        for trial in range(10):
            n = int(rng.integers(30, 200))
            d = int(rng.integers(2, 8))
            K = int(rng.integers(2, 8))
            vectors = rng.standard_normal((n, d))
            init = kmeanspp_init(vectors, K, np.random.default_rng(trial))
            part = weighted_kmeans(
                vectors, np.ones(n), K, tol=0.0, max_iter=500, init=init
            )
            ref_assign, _, ref_inertia = _lloyd_reference(vectors, init)
            np.testing.assert_array_equal(part.assignment, ref_assign)
            assert part.weighted_inertia == pytest.approx(ref_inertia, abs=1e-9)

    def test_blob_recovery_matches_bruteforce_optimum(self):
        """8+8 points in two widely separated blobs: enumerate all 2-splits.

        The brute-force minimizer of the weighted objective is the blob
        split, and the clustering returns exactly that split.
        """
        rng = np.random.default_rng(6)
        a = rng.standard_normal((8, 2)) * 0.5
        b = rng.standard_normal((8, 2)) * 0.5 + np.array([20.0, 0.0])
        vectors = np.vstack([a, b])
        weights = rng.uniform(0.5, 1.5, size=16)

        best_cost, best_mask = math.inf, None
        for bits in itertools.product([0, 1], repeat=15):
            mask = np.array((0,) + bits, dtype=bool)  # fix point 0's side
            if mask.all() or (~mask).all():
                continue
            cost = 0.0
            for side in (mask, ~mask):
                w = weights[side]
                mu = (w[:, None] * vectors[side]).sum(axis=0) / w.sum()
                cost += float((w * ((vectors[side] - mu) ** 2).sum(axis=1)).sum())
            if cost < best_cost:
                best_cost, best_mask = cost, mask
        blob_split = np.arange(16) >= 8
        assert (best_mask == blob_split).all() or (best_mask == ~blob_split).all()

        part = weighted_kmeans(vectors, weights, 2, rng=np.random.default_rng(3))
        blob = part.assignment[:8]
        assert (part.assignment[:8] == blob[0]).all()
        assert (part.assignment[8:] == part.assignment[8]).all()
        assert blob[0] != part.assignment[8]
        assert part.weighted_inertia == pytest.approx(best_cost, rel=1e-9)

    def test_two_gaussian_blobs_recovered_exactly(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((20, 2))
        b = rng.standard_normal((20, 2)) + np.array([10.0 * np.sqrt(2), 0.0])
        vectors = np.vstack([a, b])
        weights = rng.uniform(0.2, 3.0, size=40)
        part = weighted_kmeans(vectors, weights, 2, rng=np.random.default_rng(1))
        assert len(set(part.assignment[:20])) == 1
        assert len(set(part.assignment[20:])) == 1
        assert part.assignment[0] != part.assignment[-1]

    def test_inertia_monotone_nonincreasing(self):
        rng = np.random.default_rng(12)
        for trial in range(5):
            vectors = rng.standard_normal((120, 4))
            weights = rng.uniform(0.0, 2.0, size=120)
            weights[0] = 0.0
            part = weighted_kmeans(
                vectors, weights, 6, rng=np.random.default_rng(trial), tol=0.0
            )
            hist = np.array(part.inertia_history)
            assert (np.diff(hist) <= 1e-9).all()

    def test_weight_scaling_invariance(self):
        rng = np.random.default_rng(14)
        vectors = rng.standard_normal((60, 3))
        weights = rng.uniform(0.1, 1.0, size=60)
        init = kmeanspp_init(vectors, 4, np.random.default_rng(5))
        a = weighted_kmeans(vectors, weights, 4, init=init, tol=0.0)
        b = weighted_kmeans(vectors, weights * 37.5, 4, init=init, tol=0.0)
        np.testing.assert_array_equal(a.assignment, b.assignment)
        np.testing.assert_allclose(a.centroids, b.centroids, atol=1e-9)

    def test_zero_weight_sample_has_no_pull(self):
        """A zero-weight sample must not move any centroid."""
        rng = np.random.default_rng(16)
        vectors = rng.standard_normal((41, 3))
        weights = np.ones(41)
        weights[40] = 0.0
        init = kmeanspp_init(vectors[:40], 3, np.random.default_rng(2))
        with_pt = weighted_kmeans(vectors, weights, 3, init=init, tol=0.0)
        without = weighted_kmeans(vectors[:40], np.ones(40), 3, init=init, tol=0.0)
        np.testing.assert_allclose(with_pt.centroids, without.centroids, atol=1e-12)
        np.testing.assert_array_equal(with_pt.assignment[:40], without.assignment)

    def test_members_partition_inputs(self):
        rng = np.random.default_rng(18)
        vectors = rng.standard_normal((50, 2))
        ids = np.arange(100, 150)
        part = weighted_kmeans(
            vectors, np.ones(50), 5, rng=np.random.default_rng(0), indices=ids
        )
        all_members = np.concatenate(part.members)
        assert sorted(all_members.tolist()) == ids.tolist()

    def test_centroids_are_weighted_means_at_convergence(self):
        rng = np.random.default_rng(20)
        vectors = rng.standard_normal((80, 3))
        weights = rng.uniform(0.1, 2.0, size=80)
        part = weighted_kmeans(vectors, weights, 4, rng=np.random.default_rng(9), tol=0.0)
        for k in range(4):
            rows = np.flatnonzero(part.assignment == k)
            if rows.size == 0:
                continue
            w = weights[rows]
            mu = (w[:, None] * vectors[rows]).sum(axis=0) / w.sum()
            np.testing.assert_allclose(part.centroids[k], mu, rtol=1e-6)

    def test_empty_cluster_reseeded(self):
        # K=3 but only two distinct locations: one cluster must be re-seeded
        # instead of staying empty
        vectors = np.array([[0.0, 0.0]] * 5 + [[10.0, 0.0]] * 5 + [[10.0, 1e-9]])
        init = np.array([[0.0, 0.0], [10.0, 0.0], [100.0, 100.0]])
        part = weighted_kmeans(vectors, np.ones(11), 3, init=init, tol=0.0)
        sizes = sorted(m.size for m in part.members)
        assert 0 not in sizes

    def test_precondition_errors(self):
        vectors = np.zeros((4, 2))
        with pytest.raises(ClusteringError):
            weighted_kmeans(vectors, np.zeros(4), 2, rng=np.random.default_rng(0))
        with pytest.raises(ClusteringError):
            weighted_kmeans(vectors, -np.ones(4), 2, rng=np.random.default_rng(0))
        with pytest.raises(ClusteringError):
            weighted_kmeans(vectors, np.ones(4), 5, rng=np.random.default_rng(0))
        with pytest.raises(ClusteringError):
            weighted_kmeans(np.full((4, 2), np.nan), np.ones(4), 2, rng=np.random.default_rng(0))


@pytest.mark.slow
class TestRuntimeScaling:
    def test_doubling_pool_roughly_doubles_time(self):
        """Per-iteration cost is O(d K n): 2x points => at most ~2.5x time."""
        from actune import parallel

        parallel.set_threads(1)
        rng = np.random.default_rng(0)
        d, K, iters = 16, 10, 5

        def timed(n):
            vectors = rng.standard_normal((n, d))
            weights = rng.uniform(0.1, 1.0, size=n)
            init = vectors[:K].copy()
            best = math.inf
            for _ in range(3):
                t0 = time.perf_counter()
                weighted_kmeans(vectors, weights, K, max_iter=iters, tol=0.0, init=init)
                best = min(best, time.perf_counter() - t0)
            return best

        t1 = timed(100_000)
        t2 = timed(200_000)
        assert t2 / t1 <= 2.5, f"scaling ratio {t2 / t1:.2f} exceeds 2.5"
