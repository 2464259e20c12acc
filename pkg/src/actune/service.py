"""Live-mode annotation service: pending batch over HTTP, durable label intake.

Every accepted label is fsynced to a journal before the response goes out;
snapshots are written on round advance and every N accepted labels, and a
restart replays the journal on top of the latest snapshot, so no acknowledged
label is ever lost.  All state mutations funnel through one lock.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .orchestrator import (
    EngineState,
    complete_round,
    load_state,
    plan_round,
    save_state,
)

logger = logging.getLogger("actune.service")

SCHEMA_VERSION = 1
SNAPSHOT_FILE = "state.snapshot"
JOURNAL_FILE = "labels.journal"
INFO_FILE = "service.json"


class ServiceError(RuntimeError):
    pass


class AnnotationService:
    """Round state machine behind the HTTP surface.

    States: awaiting_labels (a planned batch has unlabeled tasks) and
    completed (all T rounds done).  Round advance is operator-triggered.
    """

    def __init__(
        self,
        state: EngineState,
        snapshot_dir: str | Path,
        token: str | None = None,
        class_names: list[str] | None = None,
        payloads: dict[int, str] | None = None,
        snapshot_every_labels: int = 50,
    ):
        self.state = state
        self.lock = threading.Lock()
        self.snapshot_dir = Path(snapshot_dir)
        self.snapshot_dir.mkdir(parents=True, exist_ok=True)
        self.token = token
        self.payloads = payloads or {}
        self.snapshot_every_labels = max(1, snapshot_every_labels)
        self._labels_since_snapshot = 0
        if class_names is not None and len(class_names) != state.pool.class_count:
            raise ServiceError(
                f"{len(class_names)} class names for {state.pool.class_count} classes"
            )
        self.class_names = class_names or [
            f"class_{c}" for c in range(state.pool.class_count)
        ]

        if self.state.pending_plan is None and self.state.t < self.state.config.T:
            plan_round(self.state)
        self._journal = open(self.journal_path, "ab")
        self._persist_snapshot()

    @property
    def snapshot_path(self) -> Path:
        return self.snapshot_dir / SNAPSHOT_FILE

    @property
    def journal_path(self) -> Path:
        return self.snapshot_dir / JOURNAL_FILE

    @classmethod
    def resume(cls, snapshot_dir: str | Path, **kwargs) -> "AnnotationService":
        """Restore from the latest snapshot and replay journaled labels."""
        snapshot_dir = Path(snapshot_dir)
        snapshot = snapshot_dir / SNAPSHOT_FILE
        if not snapshot.exists():
            raise ServiceError(f"no snapshot at {snapshot}")
        state = load_state(snapshot)
        journal = snapshot_dir / JOURNAL_FILE
        replayed = cls._replay_journal(state, journal)
        service = cls(state, snapshot_dir, **kwargs)
        if replayed:
            logger.info("replayed %d journaled labels", replayed)
        return service

    @staticmethod
    def _replay_journal(state: EngineState, journal: Path) -> int:
        if not journal.exists() or state.pending_plan is None:
            return 0
        batch = set(state.pending_plan.query_batch)
        current_round = state.pending_plan.round_index
        replayed = 0
        with open(journal, "rb") as fh:
            for raw in fh:
                try:
                    entry = json.loads(raw.decode("utf-8"))
                except (json.JSONDecodeError, UnicodeDecodeError):
                    # torn final line from a crash mid-write
                    logger.warning("skipping corrupt journal line")
                    continue
                if entry.get("round") != current_round:
                    continue
                index = int(entry["index"])
                if index not in batch or index in state.pending_labels:
                    continue
                state.pending_labels[index] = int(entry["class"])
                replayed += 1
        return replayed

    # -- command handlers (each takes the lock: single-writer queue) --------

    def round_info(self) -> dict:
        with self.lock:
            return self._round_info_locked()

    def _round_info_locked(self) -> dict:
        plan = self.state.pending_plan
        if plan is not None:
            pending = len(plan.query_batch) - len(self.state.pending_labels)
            status = "awaiting_labels"
            batch_size = len(plan.query_batch)
        else:
            pending = 0
            status = "completed"
            batch_size = 0
        return {
            "schema_version": SCHEMA_VERSION,
            "t": self.state.t,
            "T": self.state.config.T,
            "state": status,
            "pending": pending,
            "batch_size": batch_size,
            "labeled_total": self.state.pool.labeled_count(),
        }

    def tasks(self, limit: int | None = None) -> dict:
        with self.lock:
            plan = self.state.pending_plan
            out = []
            if plan is not None:
                for pos, index in enumerate(plan.query_batch):
                    if index in self.state.pending_labels:
                        continue
                    out.append(
                        {
                            "sample_index": index,
                            "payload": self.payloads.get(index, f"sample {index}"),
                            "round": plan.round_index,
                            "uncertainty": plan.query_uncertainty[pos]
                            if pos < len(plan.query_uncertainty)
                            else None,
                            "region_id": plan.query_region_ids[pos]
                            if pos < len(plan.query_region_ids)
                            else -1,
                        }
                    )
                    if limit is not None and len(out) >= limit:
                        break
            return {"schema_version": SCHEMA_VERSION, "tasks": out}

    def submit_label(self, index: int, cls: int, annotator_id: str) -> tuple[int, dict]:
        with self.lock:
            plan = self.state.pending_plan
            if not isinstance(cls, int) or not 0 <= cls < self.state.pool.class_count:
                return 422, {"error": f"class {cls} out of range [0, {self.state.pool.class_count})"}
            if plan is None or index in self.state.queried_round:
                if index in self.state.queried_round:
                    return 410, {
                        "error": "round already advanced",
                        "round": self.state.queried_round[index],
                    }
                return 410, {"error": "no batch awaiting labels"}
            if index not in plan.query_batch:
                return 404, {"error": f"sample {index} not in the pending batch"}
            committed = self.state.pending_labels.get(index)
            if committed is not None:
                if committed == cls:
                    return 200, self._ack(index, cls, duplicate=True)
                return 409, {"error": "conflicting label", "committed_class": committed}

            self._journal_append(
                {
                    "round": plan.round_index,
                    "index": index,
                    "class": cls,
                    "annotator_id": annotator_id,
                }
            )
            self.state.pending_labels[index] = cls
            self._labels_since_snapshot += 1
            if self._labels_since_snapshot >= self.snapshot_every_labels:
                self._persist_snapshot()
            return 200, self._ack(index, cls, duplicate=False)

    def _ack(self, index: int, cls: int, duplicate: bool) -> dict:
        plan = self.state.pending_plan
        pending = len(plan.query_batch) - len(self.state.pending_labels)
        return {
            "schema_version": SCHEMA_VERSION,
            "accepted": True,
            "duplicate": duplicate,
            "sample_index": index,
            "class": cls,
            "pending": pending,
        }

    def advance_round(self) -> tuple[int, dict]:
        with self.lock:
            plan = self.state.pending_plan
            if plan is None:
                return 409, {"error": "experiment complete", "t": self.state.t}
            remaining = len(plan.query_batch) - len(self.state.pending_labels)
            if remaining > 0:
                return 409, {"error": "batch incomplete", "remaining": remaining}
            record = complete_round(self.state)
            if self.state.t < self.state.config.T:
                plan_round(self.state)
            self._persist_snapshot()
            self._truncate_journal()
            info = self._round_info_locked()
            info["completed_round"] = record.t
            info["test_accuracy"] = record.test_accuracy
            return 200, info

    def metrics(self) -> dict:
        with self.lock:
            return {
                "schema_version": SCHEMA_VERSION,
                "records": [r.to_json_dict() for r in self.state.records],
            }

    def classes(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "classes": [
                {"id": c, "name": name} for c, name in enumerate(self.class_names)
            ],
        }

    def health(self) -> dict:
        return {"status": "ok", "schema_version": SCHEMA_VERSION}

    # -- durability ----------------------------------------------------------

    def _journal_append(self, entry: dict) -> None:
        line = (json.dumps(entry, separators=(",", ":")) + "\n").encode("utf-8")
        self._journal.write(line)
        self._journal.flush()
        os.fsync(self._journal.fileno())

    def _truncate_journal(self) -> None:
        self._journal.close()
        self._journal = open(self.journal_path, "wb")

    def _persist_snapshot(self) -> None:
        tmp = self.snapshot_path.with_suffix(".tmp")
        save_state(tmp, self.state)
        os.replace(tmp, self.snapshot_path)
        self._labels_since_snapshot = 0

    def close(self) -> None:
        self._journal.close()


def _make_handler(service: AnnotationService):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # route through logging, not stderr
            logger.debug("%s - %s", self.address_string(), fmt % args)

        def _send(self, code: int, body: dict) -> None:
            payload = json.dumps(body).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header(
                "Access-Control-Allow-Headers", "Content-Type, Authorization"
            )
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.end_headers()
            self.wfile.write(payload)

        def _authorized(self) -> bool:
            if service.token is None:
                return True
            return self.headers.get("Authorization") == f"Bearer {service.token}"

        def do_OPTIONS(self):  # CORS preflight for the browser console
            self._send(204, {})

        def do_GET(self):
            try:
                self._do_get()
            except Exception as exc:  # keep the connection JSON-clean
                logger.exception("GET %s failed", self.path)
                self._send(500, {"error": str(exc)})

        def do_POST(self):
            try:
                self._do_post()
            except Exception as exc:
                logger.exception("POST %s failed", self.path)
                self._send(500, {"error": str(exc)})

        def _do_get(self):
            url = urlparse(self.path)
            if url.path == "/health":
                self._send(200, service.health())
                return
            if not self._authorized():
                self._send(401, {"error": "missing or invalid bearer token"})
                return
            if url.path == "/round":
                self._send(200, service.round_info())
            elif url.path == "/tasks":
                query = parse_qs(url.query)
                limit = None
                if "limit" in query:
                    try:
                        limit = int(query["limit"][0])
                    except ValueError:
                        self._send(400, {"error": "limit must be an integer"})
                        return
                self._send(200, service.tasks(limit))
            elif url.path == "/metrics":
                self._send(200, service.metrics())
            elif url.path == "/classes":
                self._send(200, service.classes())
            else:
                self._send(404, {"error": f"no route {url.path}"})

        def _do_post(self):
            if not self._authorized():
                self._send(401, {"error": "missing or invalid bearer token"})
                return
            url = urlparse(self.path)
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b"{}"
            try:
                body = json.loads(raw.decode("utf-8")) if raw.strip() else {}
            except (json.JSONDecodeError, UnicodeDecodeError):
                self._send(400, {"error": "request body is not valid JSON"})
                return

            if url.path == "/labels":
                try:
                    index = int(body["index"])
                    cls = int(body["class"])
                except (KeyError, TypeError, ValueError):
                    self._send(400, {"error": "need integer 'index' and 'class'"})
                    return
                annotator = str(body.get("annotator_id", "anonymous"))
                code, payload = service.submit_label(index, cls, annotator)
                self._send(code, payload)
            elif url.path == "/round/advance":
                code, payload = service.advance_round()
                self._send(code, payload)
            else:
                self._send(404, {"error": f"no route {url.path}"})

    return Handler


def serve(
    service: AnnotationService, host: str = "127.0.0.1", port: int = 8787
) -> ThreadingHTTPServer:
    """Bind the HTTP server and record the actual address in the snapshot dir.

    Returns the server; call `serve_forever()` on it (the CLI does) or drive
    it from a thread in tests.
    """
    try:
        server = ThreadingHTTPServer((host, port), _make_handler(service))
    except OSError as exc:
        raise ServiceError(f"cannot bind {host}:{port}: {exc}") from exc
    info = {"host": host, "port": server.server_address[1], "pid": os.getpid()}
    (service.snapshot_dir / INFO_FILE).write_text(
        json.dumps(info), encoding="utf-8"
    )
    logger.info("annotation service listening on %s:%d", host, info["port"])
    return server
