"""Per-sample uncertainty scores and pseudo-labels from prediction simplices."""

from __future__ import annotations

import numpy as np

SIMPLEX_ATOL = 1e-9
KL_EPS = 1e-12


class SimplexError(ValueError):
    """Vector is not a probability simplex."""


def check_simplex(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size < 2:
        raise SimplexError(f"expected a 1-D vector of >= 2 probabilities, got shape {p.shape}")
    if not np.isfinite(p).all():
        raise SimplexError("simplex contains non-finite entries")
    if (p < -SIMPLEX_ATOL).any() or (p > 1 + SIMPLEX_ATOL).any():
        raise SimplexError(f"entries outside [0,1]: {p}")
    if abs(float(p.sum()) - 1.0) > SIMPLEX_ATOL:
        raise SimplexError(f"entries sum to {p.sum()}, not 1")
    return p


def entropy(p: np.ndarray) -> float:
    """Shannon entropy -sum p ln p (natural log, 0 ln 0 = 0)."""
    p = check_simplex(p)
    return float(entropy_rows(p[None, :])[0])


def entropy_rows(P: np.ndarray) -> np.ndarray:
    """Row-wise entropy of an (n, C) matrix of simplices."""
    P = np.asarray(P, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0.0, P * np.log(P), 0.0)
    return np.maximum(-terms.sum(axis=-1), 0.0)


def kl_divergence(q: np.ndarray, p: np.ndarray) -> float:
    """KL(q || p) with natural log and an epsilon floor on p's entries."""
    q = np.asarray(q, dtype=np.float64)
    p = np.maximum(np.asarray(p, dtype=np.float64), KL_EPS)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(q > 0.0, q * (np.log(q) - np.log(p)), 0.0)
    return float(terms.sum())


def pseudo_label(p: np.ndarray) -> tuple[int, float]:
    """Hard label: (argmax class, max probability); ties go to the lowest index."""
    p = check_simplex(p)
    cls = int(np.argmax(p))
    return cls, float(p[cls])


def pseudo_labels(P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise hard labels of an (n, C) prediction matrix."""
    P = np.asarray(P, dtype=np.float64)
    classes = np.argmax(P, axis=1)
    return classes, P[np.arange(P.shape[0]), classes]


def cal_scores(
    indices: np.ndarray,
    embeddings: np.ndarray,
    predictions: np.ndarray,
    labeled_set: np.ndarray,
    k_nn: int = 10,
) -> np.ndarray:
    """Contrastive score: mean KL(neighbor prediction || own prediction) over
    the k nearest human-labeled neighbors in embedding space.

    `predictions` must cover every sample index referenced (candidates and
    labeled neighbors).  Neighbor distance ties break toward the lower
    labeled index.
    """
    indices = np.asarray(indices, dtype=np.int64)
    labeled_set = np.asarray(labeled_set, dtype=np.int64)
    if labeled_set.size == 0:
        raise ValueError("CAL requires a non-empty labeled set")
    if not 1 <= k_nn <= labeled_set.size:
        raise ValueError(f"k_nn={k_nn} must lie in [1, |labeled|={labeled_set.size}]")

    labeled_emb = embeddings[labeled_set]
    neigh_preds = np.maximum(predictions[labeled_set], 0.0)
    with np.errstate(divide="ignore"):
        neigh_logq = np.where(neigh_preds > 0.0, np.log(neigh_preds), 0.0)
    neigh_entropy_terms = (neigh_preds * neigh_logq).sum(axis=1)  # sum q ln q

    scores = np.empty(indices.size, dtype=np.float64)
    chunk = 2048
    for start in range(0, indices.size, chunk):
        block = indices[start : start + chunk]
        diffs = embeddings[block][:, None, :] - labeled_emb[None, :, :]
        dists = (diffs * diffs).sum(axis=-1)
        # stable ordering: by distance, then by labeled index
        order = np.lexsort((np.broadcast_to(labeled_set, dists.shape), dists), axis=1)
        nearest = order[:, :k_nn]

        logp = np.log(np.maximum(predictions[block], KL_EPS))
        for row, i in enumerate(range(start, min(start + chunk, indices.size))):
            cols = nearest[row]
            # KL(q||p) = sum q ln q - sum q ln p, accumulated per neighbor
            cross = neigh_preds[cols] @ logp[row]
            scores[i] = float(np.mean(neigh_entropy_terms[cols] - cross))
    return np.maximum(scores, 0.0)


def cal_score(
    index: int,
    embeddings: np.ndarray,
    predictions: np.ndarray,
    labeled_set: np.ndarray,
    k_nn: int = 10,
) -> float:
    """Single-sample form of `cal_scores`."""
    return float(
        cal_scores(np.array([index]), embeddings, predictions, labeled_set, k_nn)[0]
    )
