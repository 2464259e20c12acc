"""Experiment configuration: hyper-parameters, validation, JSON config files."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

UNCERTAINTY_MEASURES = ("entropy", "cal")
BANK_MODES = ("prediction", "value")

# Default pairing of uncertainty measure -> memory bank mode.  Entropy works
# directly on prediction simplices, so it aggregates predictions; CAL produces
# an opaque scalar, so only the value can be aggregated.
DEFAULT_BANK_MODE = {"entropy": "prediction", "cal": "value"}


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass
class TrainingParams:
    """Fixed-schedule full-batch gradient descent settings for the built-in head.

    `init_scale` > 0 draws the per-round starting weights from a seeded
    Gaussian instead of zeros, mimicking the run-to-run variance of refitting
    a randomly initialized head; 0 keeps the deterministic zero start.
    """

    lr: float = 0.1
    epochs: int = 300
    l2: float = 1e-4
    init_scale: float = 0.0

    def validate(self) -> None:
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.l2 < 0:
            raise ConfigError(f"l2 must be >= 0, got {self.l2}")
        if self.init_scale < 0:
            raise ConfigError(f"init_scale must be >= 0, got {self.init_scale}")


@dataclass
class PoolFiles:
    """Input file locations for a pool, resolved relative to the config file.

    `labels` with `oracle=true` is ground truth for simulation; without the
    flag it seeds the initial human-labeled set.  `init_labels` optionally
    supplies a (possibly noisy) starting labeled set alongside an oracle file.
    """

    embeddings: str
    class_count: int
    labels: str | None = None
    oracle: bool = False
    init_labels: str | None = None
    test_embeddings: str | None = None
    test_labels: str | None = None
    payloads: str | None = None


@dataclass
class ServiceSettings:
    bind: str = "127.0.0.1:8787"
    token: str | None = None
    class_names: list[str] | None = None
    snapshot_every_labels: int = 50


@dataclass
class ExperimentConfig:
    """All knobs of one active self-training experiment.

    `b` is the total label budget split evenly over `T` rounds of `B`
    queries each; `K` regions are built per round and the `M` most / least
    uncertain ones drive querying / self-training.  The self-training set
    grows by `k_st` per round.  `lambda_` and `gamma` control the pseudo-label
    loss term, `m_low`/`m_high` the momentum schedule of the memory bank.
    """

    T: int = 10
    b: int = 1000
    B: int = 100
    init_labeled: int = 100
    K: int = 25
    M: int = 5
    beta: float = 0.5
    k_st: int = 500
    lambda_: float = 1.0
    gamma: float = 0.6
    m_low: float = 0.8
    m_high: float = 0.9
    uncertainty_measure: str = "entropy"
    bank_mode: str | None = None
    seed: int = 0
    cal_neighbors: int = 10
    training: TrainingParams = field(default_factory=TrainingParams)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        # T=0 is allowed as a degenerate initial-fit-only experiment
        if self.T < 0:
            raise ConfigError(f"T must be >= 0, got {self.T}")
        if self.B * self.T != self.b:
            raise ConfigError(f"budget mismatch: B*T = {self.B * self.T} != b = {self.b}")
        if self.B < 1:
            raise ConfigError(f"B must be >= 1, got {self.B}")
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if not 0 < self.M <= self.K:
            raise ConfigError(f"M must satisfy 0 < M <= K, got M={self.M}, K={self.K}")
        if not 0 < self.m_low <= self.m_high <= 1:
            raise ConfigError(
                f"momentum endpoints must satisfy 0 < m_low <= m_high <= 1, "
                f"got ({self.m_low}, {self.m_high})"
            )
        if not 0 < self.gamma < 1:
            raise ConfigError(f"gamma must lie in (0,1), got {self.gamma}")
        if self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")
        if self.lambda_ < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lambda_}")
        if self.k_st < 1:
            raise ConfigError(f"k_st must be >= 1, got {self.k_st}")
        if self.init_labeled < 0:
            raise ConfigError(f"init_labeled must be >= 0, got {self.init_labeled}")
        if self.uncertainty_measure not in UNCERTAINTY_MEASURES:
            raise ConfigError(f"unknown uncertainty measure {self.uncertainty_measure!r}")
        if self.bank_mode is not None and self.bank_mode not in BANK_MODES:
            raise ConfigError(f"unknown bank mode {self.bank_mode!r}")
        if self.cal_neighbors < 1:
            raise ConfigError(f"cal_neighbors must be >= 1, got {self.cal_neighbors}")
        self.training.validate()

    def resolved_bank_mode(self) -> str:
        """Explicit bank mode if set, otherwise the measure's default pairing."""
        if self.bank_mode is not None:
            return self.bank_mode
        return DEFAULT_BANK_MODE[self.uncertainty_measure]

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "b": self.b,
            "B": self.B,
            "init_labeled": self.init_labeled,
            "K": self.K,
            "M": self.M,
            "beta": self.beta,
            "k_st": self.k_st,
            "lambda": self.lambda_,
            "gamma": self.gamma,
            "m_low": self.m_low,
            "m_high": self.m_high,
            "uncertainty_measure": self.uncertainty_measure,
            "bank_mode": self.bank_mode,
            "seed": self.seed,
            "cal_neighbors": self.cal_neighbors,
            "training": {
                "lr": self.training.lr,
                "epochs": self.training.epochs,
                "l2": self.training.l2,
                "init_scale": self.training.init_scale,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {
            "T", "b", "B", "init_labeled", "K", "M", "beta", "k_st", "lambda",
            "gamma", "m_low", "m_high", "uncertainty_measure", "bank_mode",
            "seed", "cal_neighbors", "training", "pool", "service",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

        kwargs = {k: data[k] for k in data if k in known - {"lambda", "training", "pool", "service"}}
        if "lambda" in data:
            kwargs["lambda_"] = data["lambda"]
        # b/B may be given individually; derive the missing one from T.
        T = kwargs.get("T", cls.T)
        if "b" in kwargs and "B" not in kwargs:
            if T == 0:
                kwargs["B"] = 1 if kwargs["b"] == 0 else kwargs["b"]
            elif kwargs["b"] % T != 0:
                raise ConfigError(f"b={kwargs['b']} not divisible by T={T}")
            else:
                kwargs["B"] = kwargs["b"] // T
        elif "B" in kwargs and "b" not in kwargs:
            kwargs["b"] = kwargs["B"] * T
        if "training" in data:
            kwargs["training"] = TrainingParams(**data["training"])
        return cls(**kwargs)


@dataclass
class FileConfig:
    """Parsed config file: experiment knobs plus pool and service sections."""

    experiment: ExperimentConfig
    pool: PoolFiles | None
    service: ServiceSettings
    base_dir: Path

    def resolve(self, rel: str) -> Path:
        path = Path(rel)
        return path if path.is_absolute() else self.base_dir / path


def load_config(path: str | Path) -> FileConfig:
    """Read a JSON config file; relative paths resolve against its directory."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")

    experiment = ExperimentConfig.from_dict(data)
    pool = None
    if "pool" in data:
        try:
            pool = PoolFiles(**data["pool"])
        except TypeError as exc:
            raise ConfigError(f"{path}: bad pool section: {exc}") from exc
    service = ServiceSettings()
    if "service" in data:
        try:
            service = ServiceSettings(**data["service"])
        except TypeError as exc:
            raise ConfigError(f"{path}: bad service section: {exc}") from exc
    return FileConfig(experiment=experiment, pool=pool, service=service, base_dir=path.parent)
