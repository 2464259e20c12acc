"""Softmax head: predictions, the mixed objective, and its gradient.

The gradient oracle is central finite differences (h = 1e-5) applied
coordinate-wise to `loss_and_grad`'s loss output with the pseudo mask frozen.
"""

import math

import numpy as np
import pytest

from actune.classifier import (
    ModelParams,
    TrainingError,
    loss_and_grad,
    predict_proba,
    train_initial,
    train_selftrain,
)
from actune.config import TrainingParams


def fd_gradient(params, h, loss_fn):
    """Central-difference gradient over (weights, bias)."""
    gW = np.zeros_like(params.weights)
    gb = np.zeros_like(params.bias)
    for idx in np.ndindex(params.weights.shape):
        params.weights[idx] += h
        up = loss_fn(params)
        params.weights[idx] -= 2 * h
        down = loss_fn(params)
        params.weights[idx] += h
        gW[idx] = (up - down) / (2 * h)
    for j in range(params.bias.size):
        params.bias[j] += h
        up = loss_fn(params)
        params.bias[j] -= 2 * h
        down = loss_fn(params)
        params.bias[j] += h
        gb[j] = (up - down) / (2 * h)
    return gW, gb


class TestPredictProba:
    def test_zero_params_are_uniform(self):
        params = ModelParams.zeros(4, 3)
        probs = predict_proba(params, np.random.default_rng(0).standard_normal((10, 3)))
        np.testing.assert_allclose(probs, 0.25, atol=1e-12)

    def test_logit_shift_invariance(self):
        rng = np.random.default_rng(1)
        params = ModelParams(rng.standard_normal((3, 4)), rng.standard_normal(3))
        shifted = ModelParams(params.weights.copy(), params.bias + 7.5)
        X = rng.standard_normal((8, 4))
        np.testing.assert_allclose(
            predict_proba(params, X), predict_proba(shifted, X), atol=1e-12
        )

    def test_matches_hand_softmax(self):
        # oracle: softmax([0.3, -1.2, 2.0]) computed with plain math.exp
        params = ModelParams(weights=np.eye(3), bias=np.zeros(3))
        probs = predict_proba(params, np.array([[0.3, -1.2, 2.0]]))
        np.testing.assert_allclose(
            probs[0],
            [0.1493188621833912, 0.0333175416321614, 0.8173635961844473],
            atol=1e-9,
        )

    def test_rows_sum_to_one_for_extreme_inputs(self):
        rng = np.random.default_rng(2)
        params = ModelParams(rng.standard_normal((4, 2)) * 50, rng.standard_normal(4))
        X = rng.standard_normal((100, 2)) * 40
        probs = predict_proba(params, X)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
        assert (probs >= 0).all()

    def test_dimension_mismatch(self):
        with pytest.raises(TrainingError):
            predict_proba(ModelParams.zeros(2, 3), np.zeros((4, 5)))


class TestTrainInitial:
    def test_separable_toy_reaches_full_accuracy(self):
        X = np.array([[1.0, 0.0], [2.0, 0.5], [-1.0, 0.0], [-2.0, -0.5]])
        y = np.array([0, 0, 1, 1])
        params, report = train_initial(X, y, 2, TrainingParams(lr=0.5, epochs=500, l2=0.0))
        preds = np.argmax(predict_proba(params, X), axis=1)
        assert (preds == y).all()
        assert report.epochs_run == 500
        assert report.labeled_count == 4

    def test_single_sample_becomes_confident(self):
        X = np.array([[1.0, -2.0, 0.5]])
        y = np.array([0])
        params, _ = train_initial(X, y, 3, TrainingParams(lr=0.5, epochs=500, l2=0.0))
        probs = predict_proba(params, X)[0]
        assert probs[0] >= 0.9

    def test_zero_epochs_gives_uniform(self):
        X = np.random.default_rng(0).standard_normal((5, 2))
        y = np.zeros(5, dtype=int)
        params, report = train_initial(X, y, 4, TrainingParams(epochs=0))
        np.testing.assert_allclose(predict_proba(params, X), 0.25, atol=1e-12)
        assert report.epochs_run == 0
        assert report.final_loss == pytest.approx(math.log(4))

    def test_empty_labeled_set_rejected(self):
        with pytest.raises(TrainingError):
            train_initial(np.zeros((0, 2)), np.zeros(0, dtype=int), 2)


class TestTrainSelftrain:
    def _toy(self, rng):
        X_l = rng.standard_normal((12, 3))
        y_l = rng.integers(0, 3, size=12)
        X_s = rng.standard_normal((6, 3))
        y_s = rng.integers(0, 3, size=6)
        return X_l, y_l, X_s, y_s

    def test_empty_pseudo_matches_initial(self):
        rng = np.random.default_rng(3)
        X_l, y_l, _, _ = self._toy(rng)
        hyper = TrainingParams(lr=0.1, epochs=150)
        a, _ = train_initial(X_l, y_l, 3, hyper)
        b, _ = train_selftrain(
            X_l, y_l, np.zeros((0, 3)), np.zeros(0, dtype=int), 1.0, 0.6, 3, hyper
        )
        np.testing.assert_array_equal(a.weights, b.weights)
        np.testing.assert_array_equal(a.bias, b.bias)

    def test_lambda_zero_bit_identical(self):
        rng = np.random.default_rng(4)
        X_l, y_l, X_s, y_s = self._toy(rng)
        hyper = TrainingParams(lr=0.1, epochs=150)
        a, _ = train_selftrain(X_l, y_l, X_s, y_s, 0.0, 0.6, 3, hyper)
        b, _ = train_selftrain(
            X_l, y_l, np.zeros((0, 3)), np.zeros(0, dtype=int), 1.0, 0.6, 3, hyper
        )
        assert (a.weights == b.weights).all()
        assert (a.bias == b.bias).all()

    def test_low_confidence_pseudo_filtered(self):
        """A pseudo sample stuck at confidence ~0.55 under gamma=0.6 is
        counted as filtered and contributes nothing."""
        X_l = np.array([[1.0, 0.0], [-1.0, 0.0]])
        y_l = np.array([0, 1])
        # orthogonal pseudo point: zero weights along its axis keep it at 0.5
        X_s = np.array([[0.0, 1.0]])
        y_s = np.array([0])
        params, report = train_selftrain(
            X_l, y_l, X_s, y_s, 1.0, 0.6, 2, TrainingParams(lr=0.1, epochs=100, l2=0.0)
        )
        conf = predict_proba(params, X_s)[0, 0]
        assert conf < 0.6
        assert report.pseudo_filtered_count == 1
        assert report.pseudo_used_count == 0

    def test_confident_pseudo_used(self):
        X_l = np.array([[1.0, 0.0], [-1.0, 0.0]])
        y_l = np.array([0, 1])
        X_s = np.array([[2.0, 0.0], [-2.0, 0.0]])
        y_s = np.array([0, 1])
        _, report = train_selftrain(
            X_l, y_l, X_s, y_s, 1.0, 0.6, 2, TrainingParams(lr=0.5, epochs=300, l2=0.0)
        )
        assert report.pseudo_used_count == 2
        assert report.pseudo_filtered_count == 0

    def test_validates_gamma(self):
        X = np.zeros((1, 2))
        y = np.zeros(1, dtype=int)
        with pytest.raises(TrainingError):
            train_selftrain(X, y, X, y, 1.0, 1.5, 2)


class TestGradient:
    def test_matches_finite_differences_with_masks(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            d = int(rng.integers(2, 6))
            C = int(rng.integers(2, 5))
            n_l = int(rng.integers(2, 20))
            n_s = int(rng.integers(1, 10))
            X_l = rng.standard_normal((n_l, d))
            y_l = rng.integers(0, C, size=n_l)
            X_s = rng.standard_normal((n_s, d))
            y_s = rng.integers(0, C, size=n_s)
            mask = rng.integers(0, 2, size=n_s).astype(float)
            lam = float(rng.uniform(0.2, 2.0))
            l2 = float(rng.choice([0.0, 1e-3]))
            params = ModelParams(rng.standard_normal((C, d)) * 0.5, rng.standard_normal(C) * 0.5)

            _, gW, gb = loss_and_grad(params, X_l, y_l, X_s, y_s, mask, lam, l2)

            def loss_fn(p):
                return loss_and_grad(p, X_l, y_l, X_s, y_s, mask, lam, l2)[0]

            fdW, fdb = fd_gradient(params, 1e-5, loss_fn)
            num = np.linalg.norm(gW - fdW) + np.linalg.norm(gb - fdb)
            den = np.linalg.norm(gW) + np.linalg.norm(gb) + 1e-12
            assert num / den < 1e-4

    def test_loss_nonincreasing_small_lr(self):
        """Convex objective with a frozen mask: plain gradient descent at
        lr=1e-3 must never increase the loss."""
        rng = np.random.default_rng(11)
        X_l = rng.standard_normal((15, 4))
        y_l = rng.integers(0, 3, size=15)
        X_s = rng.standard_normal((8, 4))
        y_s = rng.integers(0, 3, size=8)
        mask = np.ones(8)
        params = ModelParams.zeros(3, 4)
        prev = math.inf
        for _ in range(200):
            loss, gW, gb = loss_and_grad(params, X_l, y_l, X_s, y_s, mask, 1.0, 1e-4)
            assert loss <= prev + 1e-12
            prev = loss
            params.weights -= 1e-3 * gW
            params.bias -= 1e-3 * gb
