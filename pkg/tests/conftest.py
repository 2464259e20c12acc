"""Shared fixtures: tiny pools and an in-process annotation service."""

import json
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

from actune.config import ExperimentConfig
from actune.orchestrator import Strategy, initialize, make_synthetic_pool
from actune.pool import seed_initial_labels
from actune.service import AnnotationService, serve


def http_call(port, method, path, body=None, token=None):
    """Blocking JSON request against a local service; returns (status, body)."""
    headers = {"Content-Type": "application/json"}
    if token is not None:
        headers["Authorization"] = f"Bearer {token}"
    data = json.dumps(body).encode("utf-8") if body is not None else None
    req = urllib.request.Request(
        f"http://127.0.0.1:{port}{path}", data=data, method=method, headers=headers
    )
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())


class LiveService:
    def __init__(self, service, server, thread):
        self.service = service
        self.server = server
        self.thread = thread
        self.port = server.server_address[1]

    def call(self, method, path, body=None, token=None):
        return http_call(self.port, method, path, body=body, token=token)

    def stop(self):
        self.server.shutdown()
        self.server.server_close()
        self.service.close()
        self.thread.join(timeout=5)


def start_service(state, snapshot_dir, **kwargs) -> LiveService:
    service = AnnotationService(state, snapshot_dir, **kwargs)
    server = serve(service, "127.0.0.1", 0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return LiveService(service, server, thread)


def make_service_state(seed=0, B=5, T=2, classes=3, per_class=30):
    pool = make_synthetic_pool(classes, per_class, 6, 6.0, np.random.default_rng(seed))
    init = 4 * classes
    seed_initial_labels(pool, init, np.random.default_rng([seed, 0]))
    config = ExperimentConfig(
        T=T, b=B * T, B=B, init_labeled=init, K=4, M=2, k_st=5, seed=seed
    )
    return initialize(config, pool, Strategy.parse("actune"))


@pytest.fixture
def live_service(tmp_path):
    live = start_service(make_service_state(), tmp_path / "svc")
    yield live
    live.stop()
