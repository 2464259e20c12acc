"""Active self-training engine.

Alternates human label acquisition on high-uncertainty regions with
self-training on momentum-stabilized low-uncertainty pseudo-labels, over a
pool of fixed feature vectors.
"""

from .config import ExperimentConfig, TrainingParams
from .pool import Pool, Status, load_pool, seed_initial_labels
from .uncertainty import entropy, cal_scores, pseudo_label
from .clustering import RegionPartition, kmeanspp_init, weighted_kmeans
from .regions import (
    RegionScore,
    RoundPlan,
    score_regions,
    select_query_batch,
    select_selftrain_candidates,
)
from .membank import MemoryBank, momentum_coefficient, select_selftrain_set
from .classifier import (
    ModelParams,
    TrainReport,
    predict_proba,
    train_initial,
    train_selftrain,
)
from .orchestrator import (
    EngineState,
    RoundRecord,
    Strategy,
    make_synthetic_pool,
    run_experiment,
    run_round,
)
from .snapshot import read_snapshot, write_snapshot

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "TrainingParams",
    "Pool",
    "Status",
    "load_pool",
    "seed_initial_labels",
    "entropy",
    "cal_scores",
    "pseudo_label",
    "RegionPartition",
    "kmeanspp_init",
    "weighted_kmeans",
    "RegionScore",
    "RoundPlan",
    "score_regions",
    "select_query_batch",
    "select_selftrain_candidates",
    "MemoryBank",
    "momentum_coefficient",
    "select_selftrain_set",
    "ModelParams",
    "TrainReport",
    "predict_proba",
    "train_initial",
    "train_selftrain",
    "EngineState",
    "RoundRecord",
    "Strategy",
    "make_synthetic_pool",
    "run_experiment",
    "run_round",
    "read_snapshot",
    "write_snapshot",
]
