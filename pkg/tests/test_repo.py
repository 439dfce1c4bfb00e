import json
import os
from pathlib import Path

import numpy as np
import pytest

from querycost.bundle import ModelBundle
from querycost.errors import CorruptBundle, InvariantViolation, NotFound
from querycost.featurize import Vocabulary, fit_idf
from querycost.labeling import CPU_SCHEME, MEMORY_SCHEME
from querycost.models import LogisticModel
from querycost.repo import list_versions, load_bundle, read_manifest, resolve_version, save_bundle


def tiny_bundle(resource="cpu", weights=None, tokens=("a", "b")):
    vocab = fit_idf(Vocabulary(list(tokens), [1] * len(tokens), 2))
    w = np.zeros((3, len(tokens))) if weights is None else np.asarray(weights, dtype=float)
    scheme = CPU_SCHEME if resource == "cpu" else MEMORY_SCHEME
    return ModelBundle(resource, scheme, vocab, LogisticModel(w, np.zeros(3)), "tfidf", {"l2": 1e-4})


def test_versions_increase_and_manifest_keys(tmp_path):
    assert save_bundle(tmp_path, tiny_bundle()) == 1
    b = tiny_bundle()
    assert save_bundle(tmp_path, b) == 2 and b.version == 2
    assert save_bundle(tmp_path, tiny_bundle("memory")) == 1
    m = read_manifest(tmp_path, "cpu", 2)
    assert set(m) == {"version", "resource", "vectorizer_kind", "model_kind", "trained_at", "class_labels",
                      "checksum"}
    assert m["version"] == 2 and m["model_kind"] == "logreg" and m["class_labels"] == list(CPU_SCHEME.labels)
    assert resolve_version(tmp_path, "cpu") == 2
    assert [v for v, _, _ in list_versions(tmp_path, "cpu")] == [1, 2]
    assert not [p for p in (tmp_path / "cpu").iterdir() if p.name.startswith(".")]


def test_round_trip_preserves_predictions(tmp_path):
    rng = np.random.default_rng(0)
    b = tiny_bundle(weights=rng.normal(size=(3, 2)))
    save_bundle(tmp_path, b)
    back = load_bundle(tmp_path, "cpu", 1)
    assert back.version == 1 and back.hyperparameters == {"l2": 1e-4}
    for q in ("a", "a b b", "c", "b"):
        assert np.array_equal(back.predict_proba(q), b.predict_proba(q))


def test_not_found(tmp_path):
    with pytest.raises(NotFound):
        load_bundle(tmp_path, "cpu")
    save_bundle(tmp_path, tiny_bundle())
    with pytest.raises(NotFound):
        load_bundle(tmp_path, "cpu", 7)


@pytest.mark.parametrize("damage", ["payload", "checksum", "manifest_checksum", "missing_payload", "bad_json",
                                    "resource"])
def test_corruption_detected(tmp_path, damage):
    save_bundle(tmp_path, tiny_bundle())
    d = tmp_path / "cpu" / "1"
    if damage == "payload":
        raw = (d / "payload.json").read_bytes()
        (d / "payload.json").write_bytes(raw.replace(b'"tfidf"', b'"count"', 1))
    elif damage == "checksum":
        (d / "payload.sha256").write_text("0" * 64)
    elif damage == "manifest_checksum":
        m = json.loads((d / "manifest.json").read_text())
        m["checksum"] = "f" * 64
        (d / "manifest.json").write_text(json.dumps(m))
    elif damage == "missing_payload":
        os.remove(d / "payload.json")
    elif damage == "bad_json":
        (d / "manifest.json").write_text("{")
    elif damage == "resource":
        m = json.loads((d / "manifest.json").read_text())
        m["resource"] = "memory"
        (d / "manifest.json").write_text(json.dumps(m))
    with pytest.raises(CorruptBundle):
        load_bundle(tmp_path, "cpu", 1)


def test_invariants_checked_on_save(tmp_path):
    b = tiny_bundle()
    b.vocabulary = fit_idf(Vocabulary(["a", "b", "c"], [1, 1, 1], 2))
    with pytest.raises(InvariantViolation):
        save_bundle(tmp_path, b)
    b = tiny_bundle()
    b.scheme = MEMORY_SCHEME
    with pytest.raises(InvariantViolation):
        save_bundle(tmp_path, b)
    b = tiny_bundle()
    b.vocabulary = Vocabulary(["a", "b"], [1, 1], 2)
    with pytest.raises(InvariantViolation):
        save_bundle(tmp_path, b)
    assert not Path(tmp_path, "cpu").exists() or not list(Path(tmp_path, "cpu").iterdir())


def test_trained_bundles_round_trip(repo, trained):
    for r in ("cpu", "memory"):
        back = load_bundle(repo, r)
        qs = [e.query for e in trained.test[:200]]
        assert np.array_equal(back.model.predict_proba_batch(back.featurize(qs)),
                              trained.bundles[r].model.predict_proba_batch(trained.bundles[r].featurize(qs)))
        assert back.training_metrics.accuracy == trained.reports[r].accuracy
