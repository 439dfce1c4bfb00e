"""HTTP prediction service with hot model reload.

Each resource's bundle (vocabulary + model) is an immutable snapshot. A swap
publishes a new mapping with a single reference assignment, and a request
reads that mapping once, so it never pairs one version's vocabulary with
another version's model.
"""

from __future__ import annotations

import json
import logging
import socket
import threading
import time
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .bundle import ModelBundle
from .errors import CorruptBundle, NotFound, StartupError
from .repo import RESOURCES, load_bundle

log = logging.getLogger(__name__)


class HttpError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code


class PredictionService:
    """The served bundles plus latency bookkeeping; independent of HTTP."""

    def __init__(self, repo_path, versions=None):
        self.repo_path = repo_path
        versions = versions or {}
        try:
            current = {r: load_bundle(repo_path, r, versions.get(r, "latest")) for r in RESOURCES}
        except (NotFound, CorruptBundle) as exc:
            raise StartupError(f"cannot load models from {repo_path}: {exc}") from None
        self._current = current
        self._swap_lock = threading.Lock()
        self.installed = {r: [b.version] for r, b in current.items()}
        self.latencies_us: deque[int] = deque(maxlen=200_000)
        self.status_counts: dict[int, int] = {}
        self._stats_lock = threading.Lock()

    def bundle(self, resource: str) -> ModelBundle:
        return self._current[resource]

    def versions(self) -> dict[str, int]:
        current = self._current
        return {r: current[r].version for r in RESOURCES}

    def metadata(self) -> dict:
        current = self._current
        out: dict = {r: current[r].version for r in RESOURCES}
        out["metadata"] = {
            r: {
                "version": b.version,
                "model_kind": b.model_kind,
                "vectorizer_kind": b.vectorizer_kind,
                "trained_at": b.trained_at,
                "class_labels": b.class_labels,
                "vocabulary_size": b.vocabulary.dimension,
                "accuracy": b.training_metrics.accuracy if b.training_metrics else None,
            }
            for r, b in current.items()
        }
        return out

    def predict(self, resource: str, query: str) -> dict:
        bundle = self._current[resource]  # one read: vocabulary and model travel together
        t0 = time.perf_counter_ns()
        proba = bundle.predict_proba(query)
        micros = (time.perf_counter_ns() - t0) // 1000
        k = int(np.argmax(proba))
        labels = bundle.scheme.labels
        return {
            "class_label": labels[k],
            "class_index": k,
            "probabilities": {lab: float(p) for lab, p in zip(labels, proba)},
            "model_version": bundle.version,
            "inference_micros": int(micros),
        }

    def swap_model(self, resource: str, version="latest") -> int:
        """Install ``version`` for ``resource``; returns the previously served version.

        Loading and validation happen before the swap, so on NotFound or
        CorruptBundle the current model keeps serving.
        """
        if resource not in RESOURCES:
            raise NotFound(f"unknown resource {resource!r}")
        new = load_bundle(self.repo_path, resource, version)
        with self._swap_lock:
            previous = self._current[resource].version
            updated = dict(self._current)
            updated[resource] = new
            self._current = updated
            self.installed[resource].append(new.version)
        log.info("%s model swapped v%s -> v%s", resource, previous, new.version)
        return previous

    def record(self, status: int, micros: int | None) -> None:
        with self._stats_lock:
            self.status_counts[status] = self.status_counts.get(status, 0) + 1
            if micros is not None:
                self.latencies_us.append(micros)

    def stats(self) -> dict:
        with self._stats_lock:
            lat = np.array(self.latencies_us, dtype=np.float64)
            counts = {str(k): v for k, v in sorted(self.status_counts.items())}
        out = {"predictions": int(lat.size), "status_counts": counts}
        if lat.size:
            p50, p95, p99 = np.percentile(lat, [50, 95, 99]) / 1000.0
            out.update(p50_ms=p50, p95_ms=p95, p99_ms=p99, max_ms=float(lat.max()) / 1000.0)
        return out

    def reset_stats(self) -> None:
        with self._stats_lock:
            self.latencies_us.clear()
            self.status_counts.clear()


def _parse_json(raw: bytes) -> dict:
    try:
        body = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise HttpError(400, "BadRequest", f"body is not valid JSON: {exc}") from None
    if not isinstance(body, dict):
        raise HttpError(400, "BadRequest", "body must be a JSON object")
    return body


def handle_predict(service: PredictionService, resource: str, raw: bytes) -> dict:
    body = _parse_json(raw)
    query = body.get("query")
    if not isinstance(query, str) or not query.strip():
        raise HttpError(400, "BadRequest", "field 'query' must be a non-empty string")
    try:
        return service.predict(resource, query)
    except Exception as exc:  # a broken snapshot must not take the process down
        log.exception("prediction failed")
        raise HttpError(503, "ModelUnavailable", str(exc)) from None


def handle_reload(service: PredictionService, raw: bytes) -> dict:
    body = _parse_json(raw)
    resource = body.get("resource")
    if resource not in RESOURCES:
        raise HttpError(400, "BadRequest", f"'resource' must be one of {list(RESOURCES)}")
    version = body.get("version", "latest")
    if not (version == "latest" or (isinstance(version, int) and not isinstance(version, bool))):
        raise HttpError(400, "BadRequest", "'version' must be an integer or \"latest\"")
    try:
        previous = service.swap_model(resource, version)
    except NotFound as exc:
        raise HttpError(404, "NotFound", str(exc)) from None
    except CorruptBundle as exc:
        raise HttpError(422, "CorruptBundle", str(exc)) from None
    return {"resource": resource, "previous_version": previous, "version": service.versions()[resource]}


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "querycost"
    timeout = 10  # idle keep-alive connections are closed after this many seconds

    def log_message(self, fmt, *args):
        log.debug("%s " + fmt, self.address_string(), *args)

    def _send(self, status: int, payload: dict, started: int | None = None, predict: bool = False) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        if self.server.draining:
            self.send_header("Connection", "close")
            self.close_connection = True
        self.end_headers()
        self.wfile.write(data)
        micros = (time.perf_counter_ns() - started) // 1000 if predict and started else None
        self.server.service.record(status, micros)

    def _body(self) -> bytes:
        length = self.headers.get("Content-Length")
        try:
            n = int(length) if length is not None else 0
        except ValueError:
            raise HttpError(400, "BadRequest", "invalid Content-Length") from None
        return self.rfile.read(n) if n > 0 else b""

    def _dispatch(self, method: str) -> None:
        started = time.perf_counter_ns()
        service: PredictionService = self.server.service
        path = self.path.split("?", 1)[0].rstrip("/") or "/"
        predict = False
        try:
            raw = self._body() if method == "POST" else b""
            if method == "GET" and path == "/health":
                payload = {"status": "ok"}
            elif method == "GET" and path == "/v1/model":
                payload = service.metadata()
            elif method == "GET" and path == "/v1/stats":
                payload = service.stats()
            elif method == "POST" and path == "/v1/stats/reset":
                service.reset_stats()
                payload = {"status": "ok"}
            elif method == "POST" and path.startswith("/v1/predict/") and path[12:] in RESOURCES:
                predict = True
                payload = handle_predict(service, path[12:], raw)
            elif method == "POST" and path == "/v1/reload":
                payload = handle_reload(service, raw)
            else:
                raise HttpError(404, "NotFound", f"no route for {method} {path}")
            self._send(200, payload, started, predict)
        except HttpError as exc:
            self._send(exc.status, {"error": exc.code, "message": str(exc)}, started, predict)
        except Exception as exc:
            log.exception("unhandled error")
            self._send(500, {"error": "Internal", "message": str(exc)}, started, predict)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")


class _Server(ThreadingHTTPServer):
    daemon_threads = False
    block_on_close = True
    request_queue_size = 256

    def __init__(self, address, service):
        self.service = service
        self.draining = False
        self._connections: set[socket.socket] = set()
        self._conn_lock = threading.Lock()
        super().__init__(address, _Handler)

    def process_request(self, request, client_address):
        with self._conn_lock:
            self._connections.add(request)
        super().process_request(request, client_address)

    def shutdown_request(self, request):
        with self._conn_lock:
            self._connections.discard(request)
        super().shutdown_request(request)

    def close_idle_readers(self) -> None:
        """Stop reading new requests; responses in progress can still be written."""
        with self._conn_lock:
            conns = list(self._connections)
        for conn in conns:
            try:
                conn.shutdown(socket.SHUT_RD)
            except OSError:
                pass


class ServiceHandle:
    def __init__(self, server: _Server, thread: threading.Thread):
        self.server = server
        self.thread = thread

    @property
    def service(self) -> PredictionService:
        return self.server.service

    @property
    def address(self) -> tuple[str, int]:
        return self.server.server_address[:2]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def swap_model(self, resource: str, version="latest") -> int:
        return self.service.swap_model(resource, version)

    def shutdown(self) -> None:
        """Stop accepting connections and wait for in-flight requests to finish."""
        self.server.draining = True
        self.server.shutdown()
        self.server.close_idle_readers()
        self.server.server_close()  # joins handler threads
        self.thread.join()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()


def parse_bind(bind) -> tuple[str, int]:
    if isinstance(bind, tuple):
        return bind[0], int(bind[1])
    host, _, port = str(bind).rpartition(":")
    try:
        return host or "127.0.0.1", int(port)
    except ValueError:
        raise StartupError(f"invalid bind address {bind!r}") from None


def serve(repo_path, bind_address=("127.0.0.1", 0), versions=None) -> ServiceHandle:
    """Load the latest (or given) bundles and start answering requests in a background thread."""
    service = PredictionService(repo_path, versions)
    try:
        server = _Server(parse_bind(bind_address), service)
    except OSError as exc:
        raise StartupError(f"cannot bind {bind_address}: {exc}") from None
    thread = threading.Thread(target=server.serve_forever, kwargs={"poll_interval": 0.1},
                              name="querycost-http", daemon=True)
    thread.start()
    log.info("serving cpu v%d / memory v%d on %s:%d", *service.versions().values(), *server.server_address[:2])
    return ServiceHandle(server, thread)


def swap_model(handle: ServiceHandle, resource: str, version="latest") -> int:
    return handle.swap_model(resource, version)
