import json
import threading
import time
import urllib.error
import urllib.request

import pytest

from querycost.errors import StartupError
from querycost.repo import save_bundle
from querycost.serving import PredictionService, handle_predict, handle_reload, HttpError, serve

from test_repo import tiny_bundle


def call(url, method="GET", body=None):
    data = None if body is None else (body if isinstance(body, bytes) else json.dumps(body).encode())
    req = urllib.request.Request(url, data=data, method=method, headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())


@pytest.fixture
def server(repo):
    with serve(repo) as handle:
        yield handle


def test_predict_endpoint(server, trained):
    q = trained.test[0].query
    status, body = call(server.url + "/v1/predict/cpu", "POST", {"query": q})
    assert status == 200
    assert set(body) == {"class_label", "class_index", "probabilities", "model_version", "inference_micros"}
    assert body["model_version"] == 1
    assert abs(sum(body["probabilities"].values()) - 1) < 1e-9
    assert body["class_label"] == max(body["probabilities"], key=body["probabilities"].get)
    status, body = call(server.url + "/v1/predict/memory", "POST", {"query": q})
    assert status == 200 and body["class_label"].startswith("[")


@pytest.mark.parametrize("body", [b"not json", b"[1,2]", {"query": ""}, {"query": 5}, {}])
def test_bad_requests(server, body):
    status, payload = call(server.url + "/v1/predict/cpu", "POST", body)
    assert status == 400 and payload["error"] == "BadRequest" and payload["message"]


def test_unknown_route(server):
    status, payload = call(server.url + "/v1/predict/disk", "POST", {"query": "x"})
    assert status == 404 and payload["error"] == "NotFound"


def test_health_model_stats(server):
    assert call(server.url + "/health") == (200, {"status": "ok"})
    status, meta = call(server.url + "/v1/model")
    assert status == 200 and meta["cpu"] == 1 and meta["memory"] == 1
    assert meta["metadata"]["cpu"]["model_kind"] == "logreg"
    call(server.url + "/v1/predict/cpu", "POST", {"query": "select 1"})
    # the server books a request after its response is written, so allow it a moment
    deadline = time.monotonic() + 2
    while (stats := call(server.url + "/v1/stats")[1])["predictions"] == 0 and time.monotonic() < deadline:
        time.sleep(0.01)
    assert stats["predictions"] == 1 and stats["status_counts"]["200"] >= 1
    assert call(server.url + "/v1/stats/reset", "POST", {})[0] == 200
    assert call(server.url + "/v1/stats")[1]["predictions"] == 0


def test_reload_endpoint(server, repo, trained):
    save_bundle(repo, trained.bundles["cpu"])
    status, body = call(server.url + "/v1/reload", "POST", {"resource": "cpu"})
    assert status == 200 and body == {"resource": "cpu", "previous_version": 1, "version": 2}
    status, body = call(server.url + "/v1/reload", "POST", {"resource": "cpu", "version": 1})
    assert status == 200 and body["version"] == 1
    assert call(server.url + "/v1/reload", "POST", {"resource": "cpu", "version": 9})[0] == 404
    assert call(server.url + "/v1/reload", "POST", {"resource": "disk"})[0] == 400
    assert call(server.url + "/v1/reload", "POST", {"resource": "cpu", "version": "2"})[0] == 400


def test_corrupt_reload_keeps_serving(server, repo, trained):
    save_bundle(repo, trained.bundles["cpu"])
    (repo / "cpu" / "2" / "payload.sha256").write_text("0" * 64)
    status, body = call(server.url + "/v1/reload", "POST", {"resource": "cpu", "version": 2})
    assert status == 422 and body["error"] == "CorruptBundle"
    assert server.service.versions()["cpu"] == 1
    assert call(server.url + "/v1/predict/cpu", "POST", {"query": "select 1"})[0] == 200


def test_startup_errors(tmp_path):
    with pytest.raises(StartupError):
        PredictionService(tmp_path)
    save_bundle(tmp_path, tiny_bundle("cpu"))
    with pytest.raises(StartupError):
        PredictionService(tmp_path)


def test_broken_model_is_503(tmp_path):
    save_bundle(tmp_path, tiny_bundle("cpu"))
    save_bundle(tmp_path, tiny_bundle("memory"))
    service = PredictionService(tmp_path)
    service._current = dict(service._current, cpu=None)
    with pytest.raises(HttpError) as exc:
        handle_predict(service, "cpu", b'{"query": "a"}')
    assert exc.value.status == 503
    with pytest.raises(HttpError):
        handle_reload(service, b'{"resource": "cpu", "version": true}')


def test_swap_under_concurrent_load(tmp_path):
    for _ in range(2):
        save_bundle(tmp_path, tiny_bundle("cpu"))
    save_bundle(tmp_path, tiny_bundle("memory"))
    with serve(tmp_path, versions={"cpu": 1}) as handle:
        errors, versions = [], set()
        stop = threading.Event()

        def client():
            while not stop.is_set():
                status, body = call(handle.url + "/v1/predict/cpu", "POST", {"query": "a b"})
                if status != 200:
                    errors.append(status)
                else:
                    versions.add(body["model_version"])

        threads = [threading.Thread(target=client) for _ in range(4)]
        for t in threads:
            t.start()
        for v in (2, 1, 2):
            handle.swap_model("cpu", v)
        stop.set()
        for t in threads:
            t.join()
        assert not errors and versions <= {1, 2}
        assert handle.service.installed["cpu"] == [1, 2, 1, 2]


def test_shutdown_is_graceful(repo):
    handle = serve(repo)
    assert call(handle.url + "/health")[0] == 200
    handle.shutdown()
    with pytest.raises(OSError):
        urllib.request.urlopen(handle.url + "/health", timeout=2)
