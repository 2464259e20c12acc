"""Dataset ownership: embeddings, per-sample label status, pool partitions.

The pool splits into the human-labeled set (status LABELED) and the query
pool (UNLABELED plus PSEUDO): pseudo-labeled samples stay queryable and a
later human label overrides the pseudo-label.  LABELED is terminal.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

EMBEDDING_MAGIC = b"AFV1"
_HEADER = struct.Struct("<QQ")  # n, d after the 4-byte magic


class PoolError(ValueError):
    """Invalid pool input or operation."""


class NonFiniteError(PoolError):
    """Embeddings contain NaN or Inf."""


class FormatError(PoolError):
    """Malformed embedding or label file."""


class Status(IntEnum):
    UNLABELED = 0
    LABELED = 1
    PSEUDO = 2


@dataclass
class Pool:
    """Embedding matrix plus label bookkeeping for every sample.

    `classes[i]` holds the human or pseudo class (-1 when neither),
    `confidences[i]` the pseudo-label confidence (0.0 when not pseudo).
    `oracle_labels` carries ground truth in simulation mode only.
    """

    embeddings: np.ndarray
    class_count: int
    statuses: np.ndarray = field(default=None)  # type: ignore[assignment]
    classes: np.ndarray = field(default=None)  # type: ignore[assignment]
    confidences: np.ndarray = field(default=None)  # type: ignore[assignment]
    oracle_labels: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.embeddings = np.ascontiguousarray(self.embeddings, dtype=np.float64)
        if self.embeddings.ndim != 2 or self.embeddings.shape[0] == 0 or self.embeddings.shape[1] == 0:
            raise PoolError(f"embeddings must be a non-empty 2-D matrix, got shape {self.embeddings.shape}")
        if not np.isfinite(self.embeddings).all():
            raise NonFiniteError("embeddings contain non-finite values")
        if self.class_count < 2:
            raise PoolError(f"class_count must be >= 2, got {self.class_count}")
        n = self.embeddings.shape[0]
        if self.statuses is None:
            self.statuses = np.zeros(n, dtype=np.uint8)
        if self.classes is None:
            self.classes = np.full(n, -1, dtype=np.int32)
        if self.confidences is None:
            self.confidences = np.zeros(n, dtype=np.float64)
        if self.oracle_labels is not None:
            self.oracle_labels = np.asarray(self.oracle_labels, dtype=np.int32)
            if self.oracle_labels.shape != (n,):
                raise PoolError("oracle_labels length mismatch")
            if ((self.oracle_labels < 0) | (self.oracle_labels >= self.class_count)).any():
                raise PoolError("oracle label out of class range")
        self._check_consistency()

    def _check_consistency(self) -> None:
        has_class = self.statuses != Status.UNLABELED
        if ((self.classes[has_class] < 0) | (self.classes[has_class] >= self.class_count)).any():
            raise PoolError("labeled/pseudo class index out of range")

    @property
    def n(self) -> int:
        return self.embeddings.shape[0]

    @property
    def d(self) -> int:
        return self.embeddings.shape[1]

    def labeled_indices(self) -> np.ndarray:
        return np.flatnonzero(self.statuses == Status.LABELED)

    def unlabeled_indices(self) -> np.ndarray:
        """Query pool: everything without a human label (pseudo included)."""
        return np.flatnonzero(self.statuses != Status.LABELED)

    def pseudo_indices(self) -> np.ndarray:
        return np.flatnonzero(self.statuses == Status.PSEUDO)

    def labeled_count(self) -> int:
        return int((self.statuses == Status.LABELED).sum())

    def mark_labeled(self, index: int, cls: int) -> None:
        """Attach a human label; overrides a pseudo-label, never another human label."""
        if not 0 <= cls < self.class_count:
            raise PoolError(f"class {cls} out of range [0, {self.class_count})")
        if self.statuses[index] == Status.LABELED:
            raise PoolError(f"sample {index} already human-labeled; labels are terminal")
        self.statuses[index] = Status.LABELED
        self.classes[index] = cls
        self.confidences[index] = 0.0

    def mark_pseudo(self, index: int, cls: int, confidence: float) -> None:
        if not 0 <= cls < self.class_count:
            raise PoolError(f"class {cls} out of range [0, {self.class_count})")
        if self.statuses[index] == Status.LABELED:
            raise PoolError(f"sample {index} is human-labeled; cannot pseudo-label")
        self.statuses[index] = Status.PSEUDO
        self.classes[index] = cls
        self.confidences[index] = float(confidence)

    def clear_pseudo(self) -> None:
        """Reset all pseudo marks; the self-training set is recomputed per round."""
        pseudo = self.statuses == Status.PSEUDO
        self.statuses[pseudo] = Status.UNLABELED
        self.classes[pseudo] = -1
        self.confidences[pseudo] = 0.0

    def labeled_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(embeddings, classes) of the human-labeled set."""
        idx = self.labeled_indices()
        return self.embeddings[idx], self.classes[idx].astype(np.int64)


def write_embeddings(path: str | Path, matrix: np.ndarray) -> None:
    """Write the binary embedding format: magic, u64 n, u64 d, float32 rows (LE)."""
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise FormatError("embedding matrix must be 2-D")
    with open(path, "wb") as fh:
        fh.write(EMBEDDING_MAGIC)
        fh.write(_HEADER.pack(matrix.shape[0], matrix.shape[1]))
        fh.write(matrix.tobytes(order="C"))


def read_embeddings(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 4 + _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    if data[:4] != EMBEDDING_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    n, d = _HEADER.unpack_from(data, 4)
    expected = 4 + _HEADER.size + n * d * 4
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for {n}x{d}, got {len(data)}")
    if n == 0 or d == 0:
        raise FormatError(f"{path}: empty matrix ({n}x{d})")
    flat = np.frombuffer(data, dtype="<f4", offset=4 + _HEADER.size)
    return flat.reshape(n, d).astype(np.float64)


def read_label_csv(path: str | Path, class_count: int, n: int) -> dict[int, int]:
    """Parse `index,label` CSV; validates ranges and rejects duplicate indices."""
    labels: dict[int, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["index", "label"]:
            raise FormatError(f"{path}: expected header 'index,label', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                idx, cls = int(row[0]), int(row[1])
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}:{lineno}: bad row {row}") from exc
            if not 0 <= idx < n:
                raise FormatError(f"{path}:{lineno}: sample index {idx} out of range [0, {n})")
            if not 0 <= cls < class_count:
                raise FormatError(f"{path}:{lineno}: label {cls} out of range [0, {class_count})")
            if idx in labels:
                raise FormatError(f"{path}:{lineno}: duplicate sample index {idx}")
            labels[idx] = cls
    return labels


def write_label_csv(path: str | Path, labels: dict[int, int]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "label"])
        for idx in sorted(labels):
            writer.writerow([idx, labels[idx]])


def load_pool(
    embeddings_file: str | Path,
    labels_file: str | Path | None = None,
    class_count: int = 2,
    oracle: bool = False,
) -> Pool:
    """Build a pool from the binary embedding file and an optional label CSV.

    With `oracle=True` the label file is ground truth for simulation: every
    sample must be covered and none starts out human-labeled.  Otherwise the
    listed samples start as human-labeled.
    """
    embeddings = read_embeddings(embeddings_file)
    pool = Pool(embeddings=embeddings, class_count=class_count)
    if labels_file is not None:
        labels = read_label_csv(labels_file, class_count, pool.n)
        if oracle:
            if len(labels) != pool.n:
                raise FormatError(
                    f"oracle label file covers {len(labels)} of {pool.n} samples"
                )
            oracle_arr = np.empty(pool.n, dtype=np.int32)
            for idx, cls in labels.items():
                oracle_arr[idx] = cls
            pool.oracle_labels = oracle_arr
        else:
            for idx, cls in labels.items():
                pool.mark_labeled(idx, cls)
    return pool


def seed_initial_labels(pool: Pool, count: int, rng: np.random.Generator) -> Pool:
    """Label `count` uniformly sampled unlabeled samples from the oracle."""
    if pool.oracle_labels is None:
        raise PoolError("no label source: oracle labels required to seed initial labels")
    candidates = np.flatnonzero(pool.statuses == Status.UNLABELED)
    if count > candidates.size:
        raise PoolError(f"cannot seed {count} labels: only {candidates.size} unlabeled samples")
    chosen = rng.choice(candidates, size=count, replace=False)
    for idx in chosen:
        pool.mark_labeled(int(idx), int(pool.oracle_labels[idx]))
    return pool
