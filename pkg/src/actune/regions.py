"""Region scoring and hierarchical batch selection.

A region's score is its members' mean uncertainty plus a weighted entropy of
their pseudo-label class frequencies; querying drains the per-cluster budget
of the highest-scoring regions, spilling leftover budget down the ranking,
while self-training candidates come from the lowest-scoring regions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .clustering import RegionPartition

logger = logging.getLogger("actune.regions")


class SelectionError(ValueError):
    """Invalid selection parameters."""


@dataclass
class RegionScore:
    cluster_id: int
    size: int
    avg_uncertainty: float
    class_diversity: float
    total: float


@dataclass
class RoundPlan:
    """One round's decisions: the query batch awaiting labels and the
    self-training set with pseudo-labels.

    `query_uncertainty` and `query_region_ids` align with `query_batch`
    (region id -1 for strategies that do not cluster).
    """

    round_index: int
    query_batch: list[int]
    selftrain_set: list[tuple[int, int, float]]
    query_regions: list[int]
    st_regions: list[int]
    selftrain_skipped: bool = False
    region_scores: list[RegionScore] = field(default_factory=list)
    query_uncertainty: list[float] = field(default_factory=list)
    query_region_ids: list[int] = field(default_factory=list)


def score_regions(
    partition: RegionPartition,
    scores: np.ndarray,
    pseudo_classes: np.ndarray,
    beta: float,
    class_count: int,
) -> tuple[list[RegionScore], int]:
    """Score every non-empty cluster; returns (scores, skipped empty count).

    `scores` and `pseudo_classes` are indexed by the sample ids stored in
    `partition.members`.
    """
    out: list[RegionScore] = []
    skipped = 0
    for k in range(partition.K):
        members = partition.members[k]
        if members.size == 0:
            skipped += 1
            continue
        u = float(np.mean(scores[members]))
        freqs = np.bincount(pseudo_classes[members], minlength=class_count) / members.size
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(freqs > 0.0, freqs * np.log(freqs), 0.0)
        diversity = max(float(-terms.sum()), 0.0)
        out.append(
            RegionScore(
                cluster_id=k,
                size=int(members.size),
                avg_uncertainty=u,
                class_diversity=diversity,
                total=u + beta * diversity,
            )
        )
    if skipped:
        logger.warning("score_regions: skipped %d empty clusters", skipped)
    return out, skipped


def _rank_descending(region_scores: list[RegionScore]) -> list[RegionScore]:
    return sorted(region_scores, key=lambda r: (-r.total, r.cluster_id))


def _rank_ascending(region_scores: list[RegionScore]) -> list[RegionScore]:
    return sorted(region_scores, key=lambda r: (r.total, r.cluster_id))


def _top_members(members: np.ndarray, scores: np.ndarray, count: int) -> np.ndarray:
    """The `count` most uncertain members, ties to the lower sample index."""
    order = np.lexsort((members, -scores[members]))
    return members[order[:count]]


def select_query_batch(
    region_scores: list[RegionScore],
    partition: RegionPartition,
    scores: np.ndarray,
    M: int,
    B: int,
) -> tuple[list[int], list[int]]:
    """Hierarchical sampling: per-cluster budget floor(B/M) over the M most
    uncertain regions, most-uncertain members first.

    The division remainder goes to the top-ranked cluster; when a cluster
    cannot fill its budget the shortfall spills to the next ranked cluster,
    cascading past the M-th region until B samples are found or the pool is
    exhausted.  Returns (query batch, the M chosen region ids).
    """
    if M <= 0:
        raise SelectionError(f"M must be positive, got {M}")
    if B <= 0:
        raise SelectionError(f"B must be positive, got {B}")
    if M > len(region_scores):
        raise SelectionError(f"M={M} exceeds live cluster count {len(region_scores)}")

    ranked = _rank_descending(region_scores)
    query_regions = [r.cluster_id for r in ranked[:M]]
    b_prime = B // M
    remainder = B - M * b_prime

    batch: list[int] = []
    taken: dict[int, int] = {}
    spill = 0
    for rank, rs in enumerate(ranked):
        if len(batch) >= B:
            break
        budget = spill
        if rank < M:
            budget += b_prime
            if rank == 0:
                budget += remainder
        elif spill == 0:
            break
        take = min(budget, rs.size, B - len(batch))
        if take > 0:
            batch.extend(int(i) for i in _top_members(partition.members[rs.cluster_id], scores, take))
            taken[rs.cluster_id] = take
        spill = budget - take

    # budget stranded by underflow at the tail of the ranking sweeps back
    # through the ranked clusters until B is filled or the pool runs out
    if len(batch) < B:
        for rs in ranked:
            if len(batch) >= B:
                break
            already = taken.get(rs.cluster_id, 0)
            if already >= rs.size:
                continue
            extra = min(B - len(batch), rs.size - already)
            ordered = _top_members(partition.members[rs.cluster_id], scores, already + extra)
            batch.extend(int(i) for i in ordered[already:])
            taken[rs.cluster_id] = already + extra
    return batch, query_regions


def select_selftrain_candidates(
    region_scores: list[RegionScore],
    partition: RegionPartition,
    M: int,
) -> tuple[np.ndarray, list[int]]:
    """Members of the M lowest-scoring regions; the final bottom-k cut happens
    against the memory bank.  Returns (candidate ids, the M region ids)."""
    if M <= 0:
        raise SelectionError(f"M must be positive, got {M}")
    if M > len(region_scores):
        raise SelectionError(f"M={M} exceeds live cluster count {len(region_scores)}")
    ranked = _rank_ascending(region_scores)
    st_regions = [r.cluster_id for r in ranked[:M]]
    if st_regions:
        candidates = np.concatenate([partition.members[k] for k in st_regions])
    else:
        candidates = np.empty(0, dtype=np.int64)
    return np.sort(candidates), st_regions
