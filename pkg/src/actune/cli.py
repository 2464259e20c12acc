"""Command line surface: simulate, serve, inspect-regions, export-metrics,
make-synthetic.

Exit codes: 0 success, 1 runtime error, 2 usage error.  Set ACTUNE_LOG to a
logging level name to control verbosity.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import parallel
from .config import ConfigError, FileConfig, load_config
from .orchestrator import (
    STRATEGY_NAMES,
    Strategy,
    initialize,
    load_state,
    make_synthetic_dataset,
    read_metrics,
    run_experiment,
    save_state,
)
from .pool import (
    PoolError,
    load_pool,
    read_embeddings,
    read_label_csv,
    seed_initial_labels,
    write_embeddings,
    write_label_csv,
)
from .service import AnnotationService, ServiceError, serve
from .snapshot import SnapshotError

logger = logging.getLogger("actune.cli")


def _setup_logging() -> None:
    level_name = os.environ.get("ACTUNE_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(
        level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s"
    )


def _build_pool(fc: FileConfig):
    """Pool plus optional held-out test arrays from the config's file section."""
    if fc.pool is None:
        raise ConfigError("config has no 'pool' section")
    pool = load_pool(
        fc.resolve(fc.pool.embeddings),
        labels_file=fc.resolve(fc.pool.labels) if fc.pool.labels else None,
        class_count=fc.pool.class_count,
        oracle=fc.pool.oracle,
    )
    if fc.pool.init_labels:
        init = read_label_csv(fc.resolve(fc.pool.init_labels), pool.class_count, pool.n)
        for idx, cls in init.items():
            pool.mark_labeled(idx, cls)
    test_X = test_y = None
    if fc.pool.test_embeddings and fc.pool.test_labels:
        test_X = read_embeddings(fc.resolve(fc.pool.test_embeddings))
        labels = read_label_csv(
            fc.resolve(fc.pool.test_labels), fc.pool.class_count, test_X.shape[0]
        )
        if len(labels) != test_X.shape[0]:
            raise ConfigError("test label file must cover every test sample")
        test_y = np.array([labels[i] for i in range(test_X.shape[0])], dtype=np.int64)
    return pool, test_X, test_y


def _load_payloads(fc: FileConfig) -> dict[int, str]:
    if fc.pool is None or not fc.pool.payloads:
        return {}
    raw = json.loads(Path(fc.resolve(fc.pool.payloads)).read_text(encoding="utf-8"))
    return {int(k): str(v) for k, v in raw.items()}


def cmd_simulate(args: argparse.Namespace) -> int:
    fc = load_config(args.config)
    config = fc.experiment
    if args.seed is not None:
        config.seed = args.seed
    strategy = Strategy.parse(args.strategy)
    parallel.set_threads(args.threads)

    pool, test_X, test_y = _build_pool(fc)
    if pool.oracle_labels is None:
        raise PoolError("simulate needs an oracle label file (pool.oracle = true)")
    if pool.labeled_count() == 0:
        rng = np.random.default_rng([config.seed, 0])
        seed_initial_labels(pool, config.init_labeled, rng)

    out_dir = Path(args.out)
    records, state = run_experiment(
        config, pool, strategy, test_X, test_y,
        out_dir=out_dir, dump_clusters=args.dump_clusters,
    )
    save_state(out_dir / "final.snapshot", state)
    final = records[-1]
    print(
        f"{strategy.name}: {len(records)} rounds, "
        f"final accuracy {final.test_accuracy}, labeled {final.labeled_total}"
    )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    fc = load_config(args.config)
    config = fc.experiment
    if args.seed is not None:
        config.seed = args.seed
    parallel.set_threads(args.threads)
    snapshot_dir = Path(args.snapshot_dir)

    service_kwargs = dict(
        token=fc.service.token,
        class_names=fc.service.class_names,
        payloads=_load_payloads(fc),
        snapshot_every_labels=fc.service.snapshot_every_labels,
    )
    if args.resume:
        service = AnnotationService.resume(snapshot_dir, **service_kwargs)
    else:
        pool, test_X, test_y = _build_pool(fc)
        if pool.labeled_count() == 0:
            if pool.oracle_labels is None:
                raise PoolError(
                    "no initial labels: provide a labels file or an oracle to seed from"
                )
            seed_initial_labels(
                pool, config.init_labeled, np.random.default_rng([config.seed, 0])
            )
        state = initialize(config, pool, Strategy.parse(args.strategy), test_X, test_y)
        service = AnnotationService(state, snapshot_dir, **service_kwargs)

    bind = args.bind or fc.service.bind
    host, _, port_text = bind.rpartition(":")
    try:
        port = int(port_text)
    except ValueError:
        raise ServiceError(f"bad bind address {bind!r}; expected host:port")
    server = serve(service, host or "127.0.0.1", port)
    print(f"annotation service on {server.server_address[0]}:{server.server_address[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        service.close()
    return 0


def cmd_inspect_regions(args: argparse.Namespace) -> int:
    state = load_state(args.snapshot)
    writer = csv.writer(sys.stdout)
    writer.writerow(
        ["cluster_id", "size", "avg_uncertainty", "class_diversity", "total", "queried"]
    )
    for row in state.last_region_rows:
        writer.writerow(
            [
                row["cluster_id"],
                row["size"],
                repr(row["avg_uncertainty"]),
                repr(row["class_diversity"]),
                repr(row["total"]),
                row["queried"],
            ]
        )
    return 0


def cmd_export_metrics(args: argparse.Namespace) -> int:
    records = read_metrics(args.metrics)
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(
            [
                "t",
                "strategy",
                "test_accuracy",
                "labeled_total",
                "query_count",
                "selftrain_size",
                "pseudo_label_accuracy",
            ]
        )
        for r in records:
            writer.writerow(
                [
                    r.t,
                    r.strategy,
                    "" if r.test_accuracy is None else repr(r.test_accuracy),
                    r.labeled_total,
                    len(r.query_indices),
                    r.selftrain_size,
                    "" if r.pseudo_label_accuracy is None else repr(r.pseudo_label_accuracy),
                ]
            )
    finally:
        if args.out:
            out.close()
    return 0


def cmd_make_synthetic(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    pool, test_X, test_y = make_synthetic_dataset(
        args.classes,
        args.per_class,
        args.dim,
        args.separation,
        rng,
        redundancy_groups=args.redundancy_groups,
        test_per_class=args.test_per_class,
    )
    write_embeddings(out_dir / "embeddings.afv", pool.embeddings)
    write_label_csv(
        out_dir / "oracle_labels.csv",
        {i: int(c) for i, c in enumerate(pool.oracle_labels)},
    )
    pool_section = {
        "embeddings": "embeddings.afv",
        "labels": "oracle_labels.csv",
        "oracle": True,
        "class_count": pool.class_count,
    }
    if test_X is not None:
        write_embeddings(out_dir / "test_embeddings.afv", test_X)
        write_label_csv(
            out_dir / "test_labels.csv", {i: int(c) for i, c in enumerate(test_y)}
        )
        pool_section["test_embeddings"] = "test_embeddings.afv"
        pool_section["test_labels"] = "test_labels.csv"

    config = {
        "T": 10,
        "B": max(1, pool.n // 100),
        "init_labeled": max(args.classes * 2, pool.n // 50),
        "K": 10,
        "M": 4,
        "beta": 0.5,
        "k_st": max(1, pool.n // 40),
        "lambda": 1.0,
        "gamma": 0.6,
        "m_low": 0.8,
        "m_high": 0.9,
        "uncertainty_measure": "entropy",
        "seed": args.seed,
        "pool": pool_section,
    }
    config["b"] = config["T"] * config["B"]
    (out_dir / "config.json").write_text(
        json.dumps(config, indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote synthetic pool (n={pool.n}, d={pool.d}) and config to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actune",
        description="Active self-training: query uncertain regions, self-train on stable confident samples.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a full oracle-mode experiment")
    sim.add_argument("--config", required=True, help="JSON config file")
    sim.add_argument("--strategy", default="actune", choices=STRATEGY_NAMES)
    sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    sim.add_argument("--out", required=True, help="output directory for metrics and snapshot")
    sim.add_argument("--dump-clusters", action="store_true", help="write per-round region CSVs")
    sim.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    sim.set_defaults(func=cmd_simulate)

    srv = sub.add_parser("serve", help="run the live annotation service")
    srv.add_argument("--config", required=True)
    srv.add_argument("--strategy", default="actune", choices=STRATEGY_NAMES)
    srv.add_argument("--seed", type=int, default=None)
    srv.add_argument("--snapshot-dir", required=True)
    srv.add_argument("--resume", action="store_true", help="restore from the latest snapshot")
    srv.add_argument("--bind", default=None, help="host:port (overrides config; port 0 = ephemeral)")
    srv.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    srv.set_defaults(func=cmd_serve)

    insp = sub.add_parser("inspect-regions", help="print the last round's region report as CSV")
    insp.add_argument("--snapshot", required=True)
    insp.set_defaults(func=cmd_inspect_regions)

    exp = sub.add_parser("export-metrics", help="convert a metrics JSONL file to CSV")
    exp.add_argument("--metrics", required=True)
    exp.add_argument("--out", default=None, help="CSV output path (default: stdout)")
    exp.set_defaults(func=cmd_export_metrics)

    mk = sub.add_parser("make-synthetic", help="generate a Gaussian-mixture pool with oracle labels")
    mk.add_argument("--out", required=True)
    mk.add_argument("--classes", type=int, default=4)
    mk.add_argument("--per-class", type=int, default=500)
    mk.add_argument("--dim", type=int, default=16)
    mk.add_argument("--separation", type=float, default=4.0)
    mk.add_argument("--redundancy-groups", type=int, default=0)
    mk.add_argument("--test-per-class", type=int, default=0)
    mk.add_argument("--seed", type=int, default=0)
    mk.set_defaults(func=cmd_make_synthetic)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, PoolError, SnapshotError, ServiceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
