"""Momentum memory bank: per-sample EMA of predictions or uncertainty values.

Aggregating across rounds penalizes samples the model flip-flops on, so
self-training only consumes samples that stayed confident over time.  The
momentum coefficient rises linearly over rounds, trusting later (better
trained) models more.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .uncertainty import entropy_rows

PREDICTION = "prediction"
VALUE = "value"


class BankError(ValueError):
    """Mode mismatch or uninitialized entry."""


def momentum_coefficient(t: int, T: int, m_low: float, m_high: float) -> float:
    """Linear schedule from m_low at t=0 to m_high at t=T."""
    if not 0 < m_low <= m_high <= 1:
        raise ValueError(f"need 0 < m_low <= m_high <= 1, got ({m_low}, {m_high})")
    if not 0 <= t <= T:
        raise ValueError(f"round t={t} outside [0, T={T}]")
    if T == 0:
        return m_low
    frac = t / T
    return (1.0 - frac) * m_low + frac * m_high


@dataclass
class SelftrainSelection:
    indices: np.ndarray
    classes: np.ndarray
    confidences: np.ndarray
    skipped: bool = False

    def as_tuples(self) -> list[tuple[int, int, float]]:
        return [
            (int(i), int(c), float(p))
            for i, c, p in zip(self.indices, self.classes, self.confidences)
        ]


class MemoryBank:
    """Pool-aligned EMA store; one row (prediction mode) or scalar (value
    mode) per sample.  Entries initialize from the round-0 model; samples
    first seen later start from their current value (momentum 1)."""

    def __init__(self, mode: str, n: int, class_count: int | None = None):
        if mode not in (PREDICTION, VALUE):
            raise BankError(f"unknown bank mode {mode!r}")
        if mode == PREDICTION and (class_count is None or class_count < 2):
            raise BankError("prediction bank needs class_count >= 2")
        self.mode = mode
        self.class_count = class_count
        if mode == PREDICTION:
            self.store = np.zeros((n, class_count), dtype=np.float64)
        else:
            self.store = np.zeros(n, dtype=np.float64)
        self.initialized = np.zeros(n, dtype=bool)
        self.round_of_last_update = 0

    @classmethod
    def from_predictions(cls, predictions: np.ndarray, indices: np.ndarray | None = None) -> "MemoryBank":
        predictions = np.asarray(predictions, dtype=np.float64)
        bank = cls(PREDICTION, predictions.shape[0], predictions.shape[1])
        if indices is None:
            indices = np.arange(predictions.shape[0])
        bank.store[indices] = predictions[indices]
        bank.initialized[indices] = True
        return bank

    @classmethod
    def from_values(cls, values: np.ndarray, indices: np.ndarray | None = None) -> "MemoryBank":
        values = np.asarray(values, dtype=np.float64)
        bank = cls(VALUE, values.shape[0])
        if indices is None:
            indices = np.arange(values.shape[0])
        bank.store[indices] = values[indices]
        bank.initialized[indices] = True
        return bank

    def entry(self, index: int) -> np.ndarray | float:
        if not self.initialized[index]:
            raise BankError(f"bank entry {index} not initialized")
        if self.mode == PREDICTION:
            return self.store[index].copy()
        return float(self.store[index])

    def update_prediction(self, index: int, f_current: np.ndarray, m_t: float) -> None:
        """EMA step g <- m_t * f + (1 - m_t) * g on one sample's simplex."""
        if self.mode != PREDICTION:
            raise BankError("update_prediction on a value-mode bank")
        if not self.initialized[index]:
            raise BankError(f"bank entry {index} not initialized")
        f = np.asarray(f_current, dtype=np.float64)
        self.store[index] = m_t * f + (1.0 - m_t) * self.store[index]
        # convex combination of simplices; clamp fp dust
        np.clip(self.store[index], 0.0, None, out=self.store[index])

    def update_value(self, index: int, a_current: float, m_t: float) -> None:
        if self.mode != VALUE:
            raise BankError("update_value on a prediction-mode bank")
        if not self.initialized[index]:
            raise BankError(f"bank entry {index} not initialized")
        self.store[index] = m_t * a_current + (1.0 - m_t) * self.store[index]

    def update_bulk(self, indices: np.ndarray, current: np.ndarray, m_t: float) -> None:
        """Vectorized EMA over many samples; uninitialized entries take their
        current value directly (first sight)."""
        indices = np.asarray(indices, dtype=np.int64)
        current = np.asarray(current, dtype=np.float64)
        init = self.initialized[indices]
        seen = indices[init]
        fresh = indices[~init]
        self.store[seen] = m_t * current[init] + (1.0 - m_t) * self.store[seen]
        self.store[fresh] = current[~init]
        self.initialized[fresh] = True
        if self.mode == PREDICTION:
            # fancy indexing copies, so clamp-and-assign rather than clip in place
            self.store[indices] = np.maximum(self.store[indices], 0.0)


def select_selftrain_set(
    bank: MemoryBank,
    candidates: np.ndarray,
    k_st: int,
    uncertainty_fn=None,
    current_preds: np.ndarray | None = None,
) -> SelftrainSelection:
    """Final bottom-k cut of the self-training candidates.

    Prediction mode scores each candidate by `uncertainty_fn` (default:
    entropy) of its aggregated simplex and pseudo-labels with its argmax.
    Value mode takes the k lowest aggregated values and pseudo-labels from
    `current_preds`.  Ties break toward the lower sample index; fewer than
    k_st candidates are returned whole; an empty candidate set yields an
    empty selection flagged as skipped.
    """
    if k_st < 1:
        raise ValueError(f"k_st must be >= 1, got {k_st}")
    candidates = np.asarray(candidates, dtype=np.int64)
    if candidates.size == 0:
        return SelftrainSelection(
            indices=np.empty(0, dtype=np.int64),
            classes=np.empty(0, dtype=np.int64),
            confidences=np.empty(0, dtype=np.float64),
            skipped=True,
        )
    if not bank.initialized[candidates].all():
        missing = candidates[~bank.initialized[candidates]]
        raise BankError(f"candidates without bank entries: {missing[:5].tolist()}...")

    if bank.mode == PREDICTION:
        aggregated = bank.store[candidates]
        if uncertainty_fn is None:
            scores = entropy_rows(aggregated)
        else:
            scores = np.asarray(uncertainty_fn(candidates, aggregated), dtype=np.float64)
        label_source = aggregated
    else:
        scores = bank.store[candidates].astype(np.float64)
        if current_preds is None:
            raise BankError("value-mode selection needs current predictions for pseudo-labels")
        label_source = current_preds[candidates]

    order = np.lexsort((candidates, scores))
    keep = order[: min(k_st, candidates.size)]
    chosen = candidates[keep]
    chosen_preds = label_source[keep]
    classes = np.argmax(chosen_preds, axis=1)
    confidences = chosen_preds[np.arange(chosen.size), classes]
    return SelftrainSelection(
        indices=chosen,
        classes=classes.astype(np.int64),
        confidences=confidences.astype(np.float64),
    )
