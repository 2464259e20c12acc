"""Linear softmax head over fixed embeddings.

Stands in for a fine-tuned network at desk scale: the engine only ever calls
fit/predict on probability simplices, so any backend exposing
`train_initial`/`train_selftrain`/`predict_proba`-shaped entry points can be
substituted for this one.

Training minimizes mean cross-entropy over the labeled set plus a weighted
pseudo-label term gated per sample by a confidence threshold; full-batch
gradient descent from a fresh zero initialization every round.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TrainingParams


class TrainingError(ValueError):
    """Empty training set or diverged optimization."""


@dataclass
class ModelParams:
    weights: np.ndarray  # (C, d)
    bias: np.ndarray  # (C,)
    trained_round: int = 0

    @classmethod
    def zeros(cls, class_count: int, dim: int, trained_round: int = 0) -> "ModelParams":
        return cls(
            weights=np.zeros((class_count, dim), dtype=np.float64),
            bias=np.zeros(class_count, dtype=np.float64),
            trained_round=trained_round,
        )

    @property
    def class_count(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class TrainReport:
    final_loss: float
    epochs_run: int
    labeled_count: int
    pseudo_used_count: int = 0
    pseudo_filtered_count: int = 0


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def predict_proba(params: ModelParams, embeddings: np.ndarray) -> np.ndarray:
    """Row-wise softmax(W v + b); rows sum to 1 via log-sum-exp stabilization."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim == 1:
        embeddings = embeddings[None, :]
    if embeddings.shape[1] != params.dim:
        raise TrainingError(
            f"embedding dimension {embeddings.shape[1]} != model dimension {params.dim}"
        )
    return _softmax_rows(embeddings @ params.weights.T + params.bias)


def loss_and_grad(
    params: ModelParams,
    labeled_X: np.ndarray,
    labeled_y: np.ndarray,
    pseudo_X: np.ndarray | None = None,
    pseudo_y: np.ndarray | None = None,
    mask: np.ndarray | None = None,
    lam: float = 0.0,
    l2: float = 0.0,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mixed objective and gradient with the pseudo mask held fixed.

    loss = mean CE(labeled) + lam/|S| * sum_i mask_i * CE(pseudo_i)
           + l2/2 * ||W||^2
    """
    W, b = params.weights, params.bias
    n_l = labeled_X.shape[0]

    logits = labeled_X @ W.T + b
    logz = np.log(np.exp(logits - logits.max(axis=1, keepdims=True)).sum(axis=1)) + logits.max(axis=1)
    loss = float(np.mean(logz - logits[np.arange(n_l), labeled_y]))

    probs = _softmax_rows(logits)
    delta = probs
    delta[np.arange(n_l), labeled_y] -= 1.0
    grad_W = delta.T @ labeled_X / n_l
    grad_b = delta.sum(axis=0) / n_l

    if pseudo_X is not None and pseudo_X.shape[0] > 0 and lam > 0.0:
        n_s = pseudo_X.shape[0]
        if mask is None:
            mask = np.ones(n_s, dtype=np.float64)
        mask = np.asarray(mask, dtype=np.float64)
        s_logits = pseudo_X @ W.T + b
        s_logz = (
            np.log(np.exp(s_logits - s_logits.max(axis=1, keepdims=True)).sum(axis=1))
            + s_logits.max(axis=1)
        )
        ce = s_logz - s_logits[np.arange(n_s), pseudo_y]
        loss += lam / n_s * float((mask * ce).sum())

        s_delta = _softmax_rows(s_logits)
        s_delta[np.arange(n_s), pseudo_y] -= 1.0
        s_delta *= mask[:, None]
        grad_W += lam / n_s * (s_delta.T @ pseudo_X)
        grad_b += lam / n_s * s_delta.sum(axis=0)

    if l2 > 0.0:
        loss += 0.5 * l2 * float((W * W).sum())
        grad_W = grad_W + l2 * W
    return loss, grad_W, grad_b


def _fit(
    labeled_X: np.ndarray,
    labeled_y: np.ndarray,
    class_count: int,
    hyper: TrainingParams,
    pseudo_X: np.ndarray | None = None,
    pseudo_y: np.ndarray | None = None,
    lam: float = 0.0,
    gamma: float = 0.6,
    trained_round: int = 0,
    init_rng: np.random.Generator | None = None,
) -> tuple[ModelParams, TrainReport]:
    labeled_X = np.asarray(labeled_X, dtype=np.float64)
    labeled_y = np.asarray(labeled_y, dtype=np.int64)
    if labeled_X.shape[0] == 0:
        raise TrainingError("empty labeled set")
    if ((labeled_y < 0) | (labeled_y >= class_count)).any():
        raise TrainingError("labeled class index out of range")

    use_pseudo = (
        pseudo_X is not None and pseudo_X.shape[0] > 0 and lam > 0.0
    )
    if use_pseudo:
        pseudo_X = np.asarray(pseudo_X, dtype=np.float64)
        pseudo_y = np.asarray(pseudo_y, dtype=np.int64)

    params = ModelParams.zeros(class_count, labeled_X.shape[1], trained_round)
    if hyper.init_scale > 0.0 and init_rng is not None:
        params.weights += hyper.init_scale * init_rng.standard_normal(params.weights.shape)
    mask = None
    used = filtered = 0
    loss = float("nan")
    epochs = 0
    for epochs in range(1, hyper.epochs + 1):
        if use_pseudo:
            # threshold gate re-evaluated with the current parameters
            conf = predict_proba(params, pseudo_X)[np.arange(pseudo_X.shape[0]), pseudo_y]
            mask = (conf > gamma).astype(np.float64)
            used = int(mask.sum())
            filtered = pseudo_X.shape[0] - used
        loss, grad_W, grad_b = loss_and_grad(
            params, labeled_X, labeled_y, pseudo_X if use_pseudo else None,
            pseudo_y if use_pseudo else None, mask, lam if use_pseudo else 0.0, hyper.l2,
        )
        if not np.isfinite(loss):
            raise TrainingError(f"training diverged at epoch {epochs}: loss={loss}")
        params.weights -= hyper.lr * grad_W
        params.bias -= hyper.lr * grad_b

    if hyper.epochs > 0:
        loss, _, _ = loss_and_grad(
            params, labeled_X, labeled_y, pseudo_X if use_pseudo else None,
            pseudo_y if use_pseudo else None, mask, lam if use_pseudo else 0.0, hyper.l2,
        )
    else:
        loss, _, _ = loss_and_grad(params, labeled_X, labeled_y, l2=hyper.l2)

    report = TrainReport(
        final_loss=float(loss),
        epochs_run=epochs if hyper.epochs > 0 else 0,
        labeled_count=int(labeled_X.shape[0]),
        pseudo_used_count=used,
        pseudo_filtered_count=filtered,
    )
    return params, report


def train_initial(
    labeled_X: np.ndarray,
    labeled_y: np.ndarray,
    class_count: int,
    hyper: TrainingParams | None = None,
    init_rng: np.random.Generator | None = None,
) -> tuple[ModelParams, TrainReport]:
    """Fit on the labeled set alone, from a fresh start each call.

    The start is all zeros unless `hyper.init_scale` and `init_rng` request a
    seeded random head initialization.
    """
    return _fit(labeled_X, labeled_y, class_count, hyper or TrainingParams(), init_rng=init_rng)


def train_selftrain(
    labeled_X: np.ndarray,
    labeled_y: np.ndarray,
    pseudo_X: np.ndarray,
    pseudo_y: np.ndarray,
    lam: float,
    gamma: float,
    class_count: int,
    hyper: TrainingParams | None = None,
    trained_round: int = 0,
    init_rng: np.random.Generator | None = None,
) -> tuple[ModelParams, TrainReport]:
    """Fit on labeled plus thresholded pseudo-labeled samples, from scratch.

    A pseudo sample contributes loss in an epoch only while the current model
    assigns its pseudo-class probability above `gamma`.
    """
    if not 0 < gamma < 1:
        raise TrainingError(f"gamma must lie in (0,1), got {gamma}")
    if lam < 0:
        raise TrainingError(f"lambda must be >= 0, got {lam}")
    return _fit(
        labeled_X, labeled_y, class_count, hyper or TrainingParams(),
        pseudo_X=pseudo_X, pseudo_y=pseudo_y, lam=lam, gamma=gamma,
        trained_round=trained_round, init_rng=init_rng,
    )
