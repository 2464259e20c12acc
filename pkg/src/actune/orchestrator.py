"""Round loop driver: cluster, score, query, label, self-train, update bank.

Each round works off the model trained in the previous round: uncertainty
scores over the query pool feed the weighted clustering, the most uncertain
regions supply the query batch, the least uncertain ones supply self-training
candidates filtered through the memory bank.  After labels arrive the model
is refit from scratch on labeled plus gated pseudo data and the bank absorbs
the new model's outputs.

Baseline strategies (random, global top-uncertainty) share all plumbing and
differ only in how the query batch is chosen.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classifier import ModelParams, TrainReport, predict_proba, train_initial, train_selftrain
from .clustering import weighted_kmeans
from .config import ExperimentConfig
from .membank import PREDICTION, VALUE, MemoryBank, momentum_coefficient, select_selftrain_set
from .pool import Pool
from .regions import RegionScore, RoundPlan, score_regions, select_query_batch, select_selftrain_candidates
from .snapshot import read_snapshot, write_snapshot
from .uncertainty import cal_scores, entropy_rows

logger = logging.getLogger("actune.orchestrator")

METRICS_SCHEMA = 1

ACTUNE = "actune"
RANDOM = "random"
TOP_UNCERTAINTY = "top_uncertainty"

STRATEGY_NAMES = (
    "actune",
    "actune-cal",
    "actune-nobank",
    "actune-cal-nobank",
    "random",
    "top-entropy",
    "top-cal",
)


class ExperimentError(RuntimeError):
    """Unrecoverable experiment state."""


@dataclass
class Strategy:
    """Query/self-training policy: the full method or one of the comparators."""

    kind: str = ACTUNE
    uncertainty_measure: str | None = None  # None: take the config's measure
    bank_mode: str | None = None  # None: config pairing
    use_bank: bool = True
    selftrain: bool | None = None  # None: on for actune, off for baselines

    def __post_init__(self) -> None:
        if self.kind not in (ACTUNE, RANDOM, TOP_UNCERTAINTY):
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.selftrain is None:
            self.selftrain = self.kind == ACTUNE

    @classmethod
    def parse(cls, name: str) -> "Strategy":
        table = {
            "actune": cls(ACTUNE),
            "actune-cal": cls(ACTUNE, uncertainty_measure="cal"),
            "actune-nobank": cls(ACTUNE, use_bank=False),
            "actune-cal-nobank": cls(ACTUNE, uncertainty_measure="cal", use_bank=False),
            "random": cls(RANDOM),
            "top-entropy": cls(TOP_UNCERTAINTY, uncertainty_measure="entropy"),
            "top-cal": cls(TOP_UNCERTAINTY, uncertainty_measure="cal"),
        }
        if name not in table:
            raise ValueError(f"unknown strategy {name!r}; choose from {sorted(table)}")
        return table[name]

    @property
    def name(self) -> str:
        if self.kind == ACTUNE:
            parts = ["actune"]
            if self.uncertainty_measure == "cal":
                parts.append("cal")
            if not self.use_bank:
                parts.append("nobank")
            return "-".join(parts)
        if self.kind == RANDOM:
            return "random"
        return f"top-{self.uncertainty_measure or 'entropy'}"

    def measure(self, config: ExperimentConfig) -> str:
        return self.uncertainty_measure or config.uncertainty_measure

    def resolved_bank_mode(self, config: ExperimentConfig) -> str:
        if self.bank_mode is not None:
            return self.bank_mode
        if self.uncertainty_measure is not None and config.bank_mode is None:
            from .config import DEFAULT_BANK_MODE

            return DEFAULT_BANK_MODE[self.uncertainty_measure]
        return config.resolved_bank_mode()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "uncertainty_measure": self.uncertainty_measure,
            "bank_mode": self.bank_mode,
            "use_bank": self.use_bank,
            "selftrain": self.selftrain,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Strategy":
        return cls(**data)


@dataclass
class RoundRecord:
    """One metrics line: the state of the experiment after round t."""

    t: int
    test_accuracy: float | None
    labeled_total: int
    query_indices: list[int]
    selftrain_size: int
    pseudo_label_accuracy: float | None
    region_summary: dict | None
    wall_time: dict = field(default_factory=dict)
    strategy: str = ""

    def to_json_dict(self, include_timing: bool = False) -> dict:
        out = {
            "schema_version": METRICS_SCHEMA,
            "t": self.t,
            "strategy": self.strategy,
            "test_accuracy": self.test_accuracy,
            "labeled_total": self.labeled_total,
            "query_indices": self.query_indices,
            "selftrain_size": self.selftrain_size,
            "pseudo_label_accuracy": self.pseudo_label_accuracy,
            "region_summary": self.region_summary,
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "RoundRecord":
        return cls(
            t=data["t"],
            test_accuracy=data["test_accuracy"],
            labeled_total=data["labeled_total"],
            query_indices=list(data["query_indices"]),
            selftrain_size=data["selftrain_size"],
            pseudo_label_accuracy=data["pseudo_label_accuracy"],
            region_summary=data["region_summary"],
            wall_time=dict(data.get("wall_time", {})),
            strategy=data.get("strategy", ""),
        )


@dataclass
class EngineState:
    """Everything one experiment carries between rounds."""

    pool: Pool
    config: ExperimentConfig
    strategy: Strategy
    params: ModelParams
    bank: MemoryBank | None
    t: int = 0
    pending_plan: RoundPlan | None = None
    pending_labels: dict[int, int] = field(default_factory=dict)
    records: list[RoundRecord] = field(default_factory=list)
    queried_round: dict[int, int] = field(default_factory=dict)
    test_X: np.ndarray | None = None
    test_y: np.ndarray | None = None
    last_train_report: TrainReport | None = None
    last_region_rows: list[dict] = field(default_factory=list)
    last_cluster_export: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def rng_for_round(self, t: int) -> np.random.Generator:
        # per-round stream derived from (seed, round); restoring a snapshot
        # reproduces the next round without serializing generator state
        return np.random.default_rng([self.config.seed, t])

    @property
    def completed(self) -> bool:
        return self.t >= self.config.T and self.pending_plan is None


class OracleLabelSource:
    """Answers queries from the pool's ground-truth column (simulation mode)."""

    def __init__(self, pool: Pool):
        if pool.oracle_labels is None:
            raise ExperimentError("oracle label source requires oracle labels")
        self.pool = pool

    def __call__(self, indices: list[int]) -> list[int]:
        return [int(self.pool.oracle_labels[i]) for i in indices]


def _uncertainty_scores(
    measure: str,
    pool: Pool,
    preds_all: np.ndarray,
    unlabeled: np.ndarray,
    cal_neighbors: int,
) -> np.ndarray:
    """Full-length score array, nonzero only on the query pool."""
    scores = np.zeros(pool.n, dtype=np.float64)
    if measure == "entropy":
        scores[unlabeled] = entropy_rows(preds_all[unlabeled])
    elif measure == "cal":
        labeled = pool.labeled_indices()
        k_nn = min(cal_neighbors, labeled.size)
        if k_nn < 1:
            raise ExperimentError("CAL needs at least one labeled sample")
        scores[unlabeled] = cal_scores(unlabeled, pool.embeddings, preds_all, labeled, k_nn)
    else:
        raise ExperimentError(f"unknown uncertainty measure {measure!r}")
    return scores


def initialize(
    config: ExperimentConfig,
    pool: Pool,
    strategy: Strategy,
    test_X: np.ndarray | None = None,
    test_y: np.ndarray | None = None,
) -> EngineState:
    """Round 0: fit on the initial labeled set and prime the memory bank."""
    labeled_X, labeled_y = pool.labeled_arrays()
    if labeled_X.shape[0] == 0:
        raise ExperimentError("cannot initialize: no labeled samples")
    t0 = time.perf_counter()
    params, report = train_initial(
        labeled_X, labeled_y, pool.class_count, config.training,
        init_rng=np.random.default_rng([config.seed, 0, 1]),
    )
    train_time = time.perf_counter() - t0

    bank = None
    preds_all = predict_proba(params, pool.embeddings)
    if strategy.selftrain and strategy.use_bank:
        mode = strategy.resolved_bank_mode(config)
        unlabeled = pool.unlabeled_indices()
        if mode == PREDICTION:
            bank = MemoryBank(PREDICTION, pool.n, pool.class_count)
            bank.update_bulk(unlabeled, preds_all[unlabeled], 1.0)
        else:
            values = _uncertainty_scores(
                strategy.measure(config), pool, preds_all, unlabeled, config.cal_neighbors
            )
            bank = MemoryBank(VALUE, pool.n)
            bank.update_bulk(unlabeled, values[unlabeled], 1.0)

    state = EngineState(
        pool=pool,
        config=config,
        strategy=strategy,
        params=params,
        bank=bank,
        test_X=test_X,
        test_y=test_y,
        last_train_report=report,
    )
    record = RoundRecord(
        t=0,
        test_accuracy=_evaluate(state, preds_all),
        labeled_total=pool.labeled_count(),
        query_indices=[],
        selftrain_size=0,
        pseudo_label_accuracy=None,
        region_summary=None,
        wall_time={"train": train_time},
        strategy=strategy.name,
    )
    state.records.append(record)
    return state


def _evaluate(state: EngineState, preds_all: np.ndarray | None = None) -> float | None:
    """Accuracy on the held-out test set, falling back to the oracle column."""
    if state.test_X is not None and state.test_y is not None:
        preds = predict_proba(state.params, state.test_X)
        return float(np.mean(np.argmax(preds, axis=1) == state.test_y))
    if state.pool.oracle_labels is not None:
        if preds_all is None:
            preds_all = predict_proba(state.params, state.pool.embeddings)
        return float(np.mean(np.argmax(preds_all, axis=1) == state.pool.oracle_labels))
    return None


def plan_round(state: EngineState) -> RoundPlan:
    """Select the query batch and the self-training set for round t+1."""
    if state.pending_plan is not None:
        raise ExperimentError("a planned round is already awaiting labels")
    t = state.t + 1
    if t > state.config.T:
        raise ExperimentError(f"experiment already ran its {state.config.T} rounds")
    config, pool, strategy = state.config, state.pool, state.strategy
    rng = state.rng_for_round(t)
    timings: dict[str, float] = {}

    unlabeled = pool.unlabeled_indices()
    if unlabeled.size == 0:
        logger.warning("round %d: query pool exhausted", t)
        plan = RoundPlan(t, [], [], [], [], selftrain_skipped=True)
        state.pending_plan = plan
        state.pending_labels = {}
        state._plan_timings = timings  # type: ignore[attr-defined]
        return plan

    t0 = time.perf_counter()
    preds_all = predict_proba(state.params, pool.embeddings)
    timings["predict"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    scores = _uncertainty_scores(
        strategy.measure(config), pool, preds_all, unlabeled, config.cal_neighbors
    )
    timings["score"] = time.perf_counter() - t0

    region_scores: list[RegionScore] = []
    audit_rows: list[dict] = []
    query_regions: list[int] = []
    st_regions: list[int] = []
    selection: list[tuple[int, int, float]] = []
    skipped = False

    if strategy.kind == RANDOM:
        batch = [int(i) for i in rng.choice(unlabeled, size=min(config.B, unlabeled.size), replace=False)]
        timings["cluster"] = 0.0
        timings["select"] = 0.0
    elif strategy.kind == TOP_UNCERTAINTY:
        order = np.lexsort((unlabeled, -scores[unlabeled]))
        batch = [int(i) for i in unlabeled[order[: config.B]]]
        timings["cluster"] = 0.0
        timings["select"] = 0.0
    if strategy.kind != ACTUNE:
        if strategy.selftrain:
            # self-training without regions: global bottom-k over the pool
            candidates = np.setdiff1d(unlabeled, np.asarray(batch, dtype=np.int64))
            k_t = t * config.k_st
            if strategy.use_bank:
                sel = select_selftrain_set(state.bank, candidates, k_t, current_preds=preds_all)
            else:
                sel = _select_without_bank(
                    strategy.resolved_bank_mode(config), candidates, k_t, preds_all, scores
                )
            selection = sel.as_tuples()
            skipped = sel.skipped
    else:
        t0 = time.perf_counter()
        weights = scores[unlabeled]
        if not (weights > 0).any():
            # a saturated model scores everything zero; fall back to plain K-means
            weights = np.ones(unlabeled.size, dtype=np.float64)
        K_eff = min(config.K, unlabeled.size)
        partition = weighted_kmeans(
            pool.embeddings[unlabeled], weights, K_eff, rng=rng, indices=unlabeled
        )
        state.last_cluster_export = (unlabeled, partition.assignment, weights)
        timings["cluster"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        pseudo_all = np.zeros(pool.n, dtype=np.int64)
        pseudo_all[unlabeled] = np.argmax(preds_all[unlabeled], axis=1)
        region_scores, _ = score_regions(partition, scores, pseudo_all, config.beta, pool.class_count)
        M_eff = min(config.M, len(region_scores))
        batch, query_regions = select_query_batch(region_scores, partition, scores, M_eff, config.B)

        if strategy.selftrain:
            candidates, st_regions = select_selftrain_candidates(region_scores, partition, M_eff)
            candidates = np.setdiff1d(candidates, np.asarray(batch, dtype=np.int64), assume_unique=False)
            k_t = t * config.k_st
            if strategy.use_bank:
                sel = select_selftrain_set(state.bank, candidates, k_t, current_preds=preds_all)
            else:
                sel = _select_without_bank(
                    strategy.resolved_bank_mode(config), candidates, k_t, preds_all, scores
                )
            selection = sel.as_tuples()
            skipped = sel.skipped

        batch_arr = np.asarray(batch, dtype=np.int64)
        for rs in region_scores:
            queried = int(np.isin(partition.members[rs.cluster_id], batch_arr).sum())
            audit_rows.append(
                {
                    "cluster_id": rs.cluster_id,
                    "size": rs.size,
                    "avg_uncertainty": rs.avg_uncertainty,
                    "class_diversity": rs.class_diversity,
                    "total": rs.total,
                    "queried": queried,
                }
            )
        timings["select"] = time.perf_counter() - t0

    batch_arr = np.asarray(batch, dtype=np.int64)
    if strategy.kind == ACTUNE and batch_arr.size:
        rows = np.searchsorted(unlabeled, batch_arr)
        region_ids = [int(k) for k in partition.assignment[rows]]
    else:
        region_ids = [-1] * len(batch)

    plan = RoundPlan(
        round_index=t,
        query_batch=batch,
        selftrain_set=selection,
        query_regions=query_regions,
        st_regions=st_regions,
        selftrain_skipped=skipped,
        region_scores=region_scores,
        query_uncertainty=[float(s) for s in scores[batch_arr]],
        query_region_ids=region_ids,
    )
    state.pending_plan = plan
    state.pending_labels = {}
    state.last_region_rows = audit_rows
    state._plan_timings = timings  # type: ignore[attr-defined]
    return plan


def _select_without_bank(
    mode: str,
    candidates: np.ndarray,
    k_st: int,
    preds_all: np.ndarray,
    scores: np.ndarray,
):
    """Memory-bank ablation: rank candidates by the current round alone."""
    if mode == PREDICTION:
        temp = MemoryBank.from_predictions(preds_all)
    else:
        temp = MemoryBank.from_values(scores)
    return select_selftrain_set(temp, candidates, k_st, current_preds=preds_all)


def complete_round(state: EngineState) -> RoundRecord:
    """Apply the pending labels, retrain from scratch, refresh the bank."""
    plan = state.pending_plan
    if plan is None:
        raise ExperimentError("no planned round to complete")
    missing = [i for i in plan.query_batch if i not in state.pending_labels]
    if missing:
        raise ExperimentError(f"{len(missing)} query samples still unlabeled")
    config, pool, strategy = state.config, state.pool, state.strategy
    timings = dict(getattr(state, "_plan_timings", {}))

    for idx in plan.query_batch:
        pool.mark_labeled(idx, state.pending_labels[idx])
        state.queried_round[idx] = plan.round_index

    pool.clear_pseudo()
    for idx, cls, conf in plan.selftrain_set:
        pool.mark_pseudo(idx, cls, conf)

    t0 = time.perf_counter()
    labeled_X, labeled_y = pool.labeled_arrays()
    init_rng = np.random.default_rng([config.seed, plan.round_index, 1])
    if plan.selftrain_set:
        st_idx = np.array([i for i, _, _ in plan.selftrain_set], dtype=np.int64)
        st_y = np.array([c for _, c, _ in plan.selftrain_set], dtype=np.int64)
        params, report = train_selftrain(
            labeled_X, labeled_y, pool.embeddings[st_idx], st_y,
            config.lambda_, config.gamma, pool.class_count, config.training,
            trained_round=plan.round_index, init_rng=init_rng,
        )
    else:
        params, report = train_initial(
            labeled_X, labeled_y, pool.class_count, config.training, init_rng=init_rng
        )
        params.trained_round = plan.round_index
    state.params = params
    state.last_train_report = report
    timings["train"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    preds_all = predict_proba(params, pool.embeddings)
    if state.bank is not None:
        unlabeled = pool.unlabeled_indices()
        if unlabeled.size:
            m_t = momentum_coefficient(plan.round_index, config.T, config.m_low, config.m_high)
            if state.bank.mode == PREDICTION:
                state.bank.update_bulk(unlabeled, preds_all[unlabeled], m_t)
            else:
                values = _uncertainty_scores(
                    strategy.measure(config), pool, preds_all, unlabeled, config.cal_neighbors
                )
                state.bank.update_bulk(unlabeled, values[unlabeled], m_t)
            state.bank.round_of_last_update = plan.round_index
    timings["bank"] = time.perf_counter() - t0

    pl_accuracy = None
    if pool.oracle_labels is not None and plan.selftrain_set:
        truth = pool.oracle_labels[[i for i, _, _ in plan.selftrain_set]]
        guesses = np.array([c for _, c, _ in plan.selftrain_set])
        pl_accuracy = float(np.mean(guesses == truth))

    summary = None
    if plan.region_scores:
        totals = [rs.total for rs in plan.region_scores]
        summary = {
            "live_regions": len(plan.region_scores),
            "u_min": min(totals),
            "u_max": max(totals),
            "u_mean": sum(totals) / len(totals),
            "query_regions": plan.query_regions,
            "st_regions": plan.st_regions,
        }

    record = RoundRecord(
        t=plan.round_index,
        test_accuracy=_evaluate(state, preds_all),
        labeled_total=pool.labeled_count(),
        query_indices=list(plan.query_batch),
        selftrain_size=len(plan.selftrain_set),
        pseudo_label_accuracy=pl_accuracy,
        region_summary=summary,
        wall_time=timings,
        strategy=strategy.name,
    )
    state.records.append(record)
    state.t = plan.round_index
    state.pending_plan = None
    state.pending_labels = {}
    return record


def run_round(state: EngineState, label_source) -> RoundRecord:
    """One simulation round: plan, acquire labels, train, update."""
    plan = state.pending_plan or plan_round(state)
    labels = label_source(plan.query_batch)
    if len(labels) != len(plan.query_batch):
        raise ExperimentError("label source returned a mismatched label count")
    state.pending_labels = {int(i): int(c) for i, c in zip(plan.query_batch, labels)}
    return complete_round(state)


def run_experiment(
    config: ExperimentConfig,
    pool: Pool,
    strategy: Strategy,
    test_X: np.ndarray | None = None,
    test_y: np.ndarray | None = None,
    out_dir: str | Path | None = None,
    dump_clusters: bool = False,
) -> tuple[list[RoundRecord], EngineState]:
    """Initial fit plus T rounds against the oracle; optionally write metrics,
    audit log, and per-round cluster CSVs into `out_dir`."""
    state = initialize(config, pool, strategy, test_X, test_y)
    label_source = OracleLabelSource(pool)
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    for t in range(1, config.T + 1):
        record = run_round(state, label_source)
        logger.info(
            "round %d/%d: accuracy=%s labeled=%d |S|=%d",
            t, config.T, record.test_accuracy, record.labeled_total, record.selftrain_size,
        )
        if out_path is not None:
            _append_audit(out_path / "audit.jsonl", state, record)
            if dump_clusters and state.last_cluster_export is not None:
                _dump_cluster_csv(out_path / f"clusters_round_{t:04d}.csv", state)

    if out_path is not None:
        write_metrics(out_path / "metrics.jsonl", state.records)
    return state.records, state


def write_metrics(path: str | Path, records: list[RoundRecord]) -> None:
    """JSON-lines metrics, one record per line, stable key order (no timings)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json_dict(), separators=(",", ":")) + "\n")


def read_metrics(path: str | Path) -> list[RoundRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(RoundRecord.from_json_dict(json.loads(line)))
    return records


def _append_audit(path: Path, state: EngineState, record: RoundRecord) -> None:
    entry = {
        "t": record.t,
        "region_scores": state.last_region_rows,
        "query_regions": record.region_summary["query_regions"] if record.region_summary else [],
        "st_regions": record.region_summary["st_regions"] if record.region_summary else [],
        "query_indices": record.query_indices,
    }
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(entry, separators=(",", ":")) + "\n")


def _dump_cluster_csv(path: Path, state: EngineState) -> None:
    # per-sample debug export for the round that was just planned/completed
    indices, assignment, weights = state.last_cluster_export
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index,cluster,weight\n")
        for i, k, w in zip(indices, assignment, weights):
            fh.write(f"{int(i)},{int(k)},{float(w)!r}\n")


def make_synthetic_dataset(
    classes: int,
    per_class: int,
    d: int,
    separation: float,
    rng: np.random.Generator,
    redundancy_groups: int = 0,
    test_per_class: int = 0,
) -> tuple[Pool, np.ndarray | None, np.ndarray | None]:
    """Gaussian mixture with unit within-class spread and centers roughly
    `separation` apart; optional near-duplicate groups stress batch diversity."""
    if classes < 1 or per_class < 1 or d < 1:
        raise ValueError("classes, per_class, and d must all be >= 1")
    dirs = rng.standard_normal((classes, d))
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    centers = (separation / np.sqrt(2.0)) * dirs / norms

    X = np.concatenate(
        [centers[c] + rng.standard_normal((per_class, d)) for c in range(classes)]
    )
    y = np.repeat(np.arange(classes, dtype=np.int32), per_class)

    if redundancy_groups:
        base_rows = rng.choice(X.shape[0], size=redundancy_groups, replace=False)
        dup_size = 10
        dup_X = []
        dup_y = []
        for row in base_rows:
            jitter = 1e-6 * rng.standard_normal((dup_size, d))
            dup_X.append(X[row] + jitter)
            dup_y.append(np.full(dup_size, y[row], dtype=np.int32))
        X = np.concatenate([X] + dup_X)
        y = np.concatenate([y] + dup_y)

    pool = Pool(embeddings=X, class_count=max(classes, 2), oracle_labels=y)

    test_X = test_y = None
    if test_per_class:
        test_X = np.concatenate(
            [centers[c] + rng.standard_normal((test_per_class, d)) for c in range(classes)]
        )
        test_y = np.repeat(np.arange(classes, dtype=np.int64), test_per_class)
    return pool, test_X, test_y


def make_synthetic_pool(
    classes: int,
    per_class: int,
    d: int,
    separation: float,
    rng: np.random.Generator,
    redundancy_groups: int = 0,
) -> Pool:
    pool, _, _ = make_synthetic_dataset(
        classes, per_class, d, separation, rng, redundancy_groups=redundancy_groups
    )
    return pool


# --- snapshot round-trip -------------------------------------------------


def _plan_to_dict(plan: RoundPlan | None) -> dict | None:
    if plan is None:
        return None
    return {
        "round_index": plan.round_index,
        "query_batch": plan.query_batch,
        "selftrain_set": [[i, c, p] for i, c, p in plan.selftrain_set],
        "query_regions": plan.query_regions,
        "st_regions": plan.st_regions,
        "selftrain_skipped": plan.selftrain_skipped,
        "query_uncertainty": plan.query_uncertainty,
        "query_region_ids": plan.query_region_ids,
        "region_scores": [
            {
                "cluster_id": rs.cluster_id,
                "size": rs.size,
                "avg_uncertainty": rs.avg_uncertainty,
                "class_diversity": rs.class_diversity,
                "total": rs.total,
            }
            for rs in plan.region_scores
        ],
    }


def _plan_from_dict(data: dict | None) -> RoundPlan | None:
    if data is None:
        return None
    return RoundPlan(
        round_index=data["round_index"],
        query_batch=[int(i) for i in data["query_batch"]],
        selftrain_set=[(int(i), int(c), float(p)) for i, c, p in data["selftrain_set"]],
        query_regions=[int(k) for k in data["query_regions"]],
        st_regions=[int(k) for k in data["st_regions"]],
        selftrain_skipped=data["selftrain_skipped"],
        region_scores=[RegionScore(**rs) for rs in data["region_scores"]],
        query_uncertainty=[float(u) for u in data.get("query_uncertainty", [])],
        query_region_ids=[int(k) for k in data.get("query_region_ids", [])],
    )


def save_state(path: str | Path, state: EngineState) -> None:
    round_state = {
        "t": state.t,
        "config": state.config.to_dict(),
        "strategy": state.strategy.to_dict(),
        "pending_plan": _plan_to_dict(state.pending_plan),
        "pending_labels": {str(k): v for k, v in sorted(state.pending_labels.items())},
        "queried_round": {str(k): v for k, v in sorted(state.queried_round.items())},
        "records": [r.to_json_dict(include_timing=True) for r in state.records],
        "last_region_rows": state.last_region_rows,
    }
    write_snapshot(path, state.pool, round_state, state.bank, state.params)


def load_state(
    path: str | Path,
    test_X: np.ndarray | None = None,
    test_y: np.ndarray | None = None,
) -> EngineState:
    pool, round_state, bank, params = read_snapshot(path)
    if params is None:
        raise ExperimentError(f"{path}: snapshot has no model parameters")
    config = ExperimentConfig.from_dict(round_state["config"])
    state = EngineState(
        pool=pool,
        config=config,
        strategy=Strategy.from_dict(round_state["strategy"]),
        params=params,
        bank=bank,
        t=round_state["t"],
        pending_plan=_plan_from_dict(round_state["pending_plan"]),
        pending_labels={int(k): v for k, v in round_state["pending_labels"].items()},
        queried_round={int(k): v for k, v in round_state["queried_round"].items()},
        records=[RoundRecord.from_json_dict(r) for r in round_state["records"]],
        test_X=test_X,
        test_y=test_y,
    )
    state.last_region_rows = round_state.get("last_region_rows", [])
    return state
