"""Durable state snapshots: pool, memory bank, model, round state in one file.

Layout: magic ``ASNP``, u32 format version, u64 JSON-header length, the UTF-8
JSON header (array manifest plus round metadata), then the raw little-endian
array bytes in manifest order.  Writing the restored state back produces a
byte-identical file.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .classifier import ModelParams
from .membank import PREDICTION, MemoryBank
from .pool import Pool

SNAPSHOT_MAGIC = b"ASNP"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sIQ")


class SnapshotError(ValueError):
    """Corrupt, truncated, or version-mismatched snapshot."""


def _array_entries(
    pool: Pool, bank: MemoryBank | None, params: ModelParams | None
) -> list[tuple[str, np.ndarray]]:
    entries = [
        ("embeddings", pool.embeddings.astype("<f8")),
        ("statuses", pool.statuses.astype("<u1")),
        ("classes", pool.classes.astype("<i4")),
        ("confidences", pool.confidences.astype("<f8")),
    ]
    if pool.oracle_labels is not None:
        entries.append(("oracle_labels", pool.oracle_labels.astype("<i4")))
    if bank is not None:
        entries.append(("bank_store", bank.store.astype("<f8")))
        entries.append(("bank_initialized", bank.initialized.astype("<u1")))
    if params is not None:
        entries.append(("model_weights", params.weights.astype("<f8")))
        entries.append(("model_bias", params.bias.astype("<f8")))
    return entries


def write_snapshot(
    path: str | Path,
    pool: Pool,
    round_state: dict,
    bank: MemoryBank | None = None,
    params: ModelParams | None = None,
) -> None:
    """Serialize the full experiment state; `round_state` must be JSON-safe."""
    entries = _array_entries(pool, bank, params)
    header = {
        "format_version": FORMAT_VERSION,
        "class_count": pool.class_count,
        "bank_mode": bank.mode if bank is not None else None,
        "trained_round": params.trained_round if params is not None else None,
        "round_state": round_state,
        "arrays": [
            {"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)}
            for name, arr in entries
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(SNAPSHOT_MAGIC, FORMAT_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for _, arr in entries:
            fh.write(np.ascontiguousarray(arr).tobytes(order="C"))


def read_snapshot(path: str | Path) -> tuple[Pool, dict, MemoryBank | None, ModelParams | None]:
    """Restore (pool, round_state, bank, params) from a snapshot file."""
    data = Path(path).read_bytes()
    if len(data) < _PREFIX.size:
        raise SnapshotError(f"{path}: truncated prefix")
    magic, version, header_len = _PREFIX.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise SnapshotError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise SnapshotError(f"{path}: unsupported format version {version}")
    if len(data) < _PREFIX.size + header_len:
        raise SnapshotError(f"{path}: truncated header")
    try:
        header = json.loads(data[_PREFIX.size : _PREFIX.size + header_len].decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SnapshotError(f"{path}: corrupt header: {exc}") from exc

    arrays: dict[str, np.ndarray] = {}
    offset = _PREFIX.size + header_len
    for meta in header["arrays"]:
        dtype = np.dtype(meta["dtype"])
        shape = tuple(meta["shape"])
        nbytes = dtype.itemsize * int(np.prod(shape)) if shape else dtype.itemsize
        if offset + nbytes > len(data):
            raise SnapshotError(f"{path}: truncated array {meta['name']}")
        arrays[meta["name"]] = (
            np.frombuffer(data, dtype=dtype, count=int(np.prod(shape)), offset=offset)
            .reshape(shape)
            .copy()
        )
        offset += nbytes
    if offset != len(data):
        raise SnapshotError(f"{path}: {len(data) - offset} trailing bytes")

    required = {"embeddings", "statuses", "classes", "confidences"}
    if not required <= set(arrays):
        raise SnapshotError(f"{path}: missing arrays {required - set(arrays)}")

    pool = Pool(
        embeddings=arrays["embeddings"].astype(np.float64),
        class_count=header["class_count"],
        statuses=arrays["statuses"].astype(np.uint8),
        classes=arrays["classes"].astype(np.int32),
        confidences=arrays["confidences"].astype(np.float64),
        oracle_labels=arrays.get("oracle_labels"),
    )

    bank = None
    if header.get("bank_mode") is not None:
        mode = header["bank_mode"]
        store = arrays["bank_store"].astype(np.float64)
        bank = MemoryBank(
            mode,
            pool.n,
            class_count=pool.class_count if mode == PREDICTION else None,
        )
        bank.store = store
        bank.initialized = arrays["bank_initialized"].astype(bool)

    params = None
    if "model_weights" in arrays:
        params = ModelParams(
            weights=arrays["model_weights"].astype(np.float64),
            bias=arrays["model_bias"].astype(np.float64),
            trained_round=header.get("trained_round") or 0,
        )
    return pool, header["round_state"], bank, params
