"""Versioned on-disk model repository.

Layout::

    <repo>/<resource>/<version>/manifest.json
    <repo>/<resource>/<version>/payload.json
    <repo>/<resource>/<version>/payload.sha256

A version directory is assembled under a dot-prefixed temporary name and
renamed into place, so readers never see a partial bundle.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
from pathlib import Path

from .bundle import ModelBundle
from .errors import CorruptBundle, InvariantViolation, NotFound

MANIFEST = "manifest.json"
PAYLOAD = "payload.json"
CHECKSUM = "payload.sha256"
RESOURCES = ("cpu", "memory")


def _versions(repo_path, resource) -> list[int]:
    d = Path(repo_path) / resource
    if not d.is_dir():
        return []
    return sorted(int(p.name) for p in d.iterdir() if p.is_dir() and p.name.isdigit())


def save_bundle(repo_path, bundle: ModelBundle) -> int:
    """Persist ``bundle`` as the next version for its resource and return it."""
    bundle.check()
    root = Path(repo_path) / bundle.resource
    root.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(bundle.payload(), separators=(",", ":")).encode("utf-8")
    digest = hashlib.sha256(payload).hexdigest()
    version = (_versions(repo_path, bundle.resource) or [0])[-1] + 1
    manifest = {
        "version": version,
        "resource": bundle.resource,
        "vectorizer_kind": bundle.vectorizer_kind,
        "model_kind": bundle.model_kind,
        "trained_at": bundle.trained_at,
        "class_labels": bundle.class_labels,
        "checksum": digest,
    }
    tmp = Path(tempfile.mkdtemp(prefix=".tmp-", dir=root))
    try:
        tmp.chmod(0o755)
        (tmp / PAYLOAD).write_bytes(payload)
        (tmp / CHECKSUM).write_text(digest + "\n")
        (tmp / MANIFEST).write_text(json.dumps(manifest, indent=2))
        for name in (PAYLOAD, CHECKSUM, MANIFEST):
            with open(tmp / name, "rb") as fh:
                os.fsync(fh.fileno())
        os.rename(tmp, root / str(version))
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    bundle.version = version
    return version


def read_manifest(repo_path, resource, version) -> dict:
    path = Path(repo_path) / resource / str(version) / MANIFEST
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise NotFound(f"{resource} version {version} not found in {repo_path}") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptBundle(f"unreadable manifest for {resource} v{version}: {exc}") from None


def resolve_version(repo_path, resource, version="latest") -> int:
    versions = _versions(repo_path, resource)
    if version in (None, "latest"):
        if not versions:
            raise NotFound(f"no {resource} bundles in {repo_path}")
        return versions[-1]
    version = int(version)
    if version not in versions:
        raise NotFound(f"{resource} version {version} not found in {repo_path}")
    return version


def load_bundle(repo_path, resource, version="latest") -> ModelBundle:
    """Load and verify a bundle; ``version`` is an int or ``"latest"``."""
    version = resolve_version(repo_path, resource, version)
    d = Path(repo_path) / resource / str(version)
    manifest = read_manifest(repo_path, resource, version)
    try:
        raw = (d / PAYLOAD).read_bytes()
        stored = (d / CHECKSUM).read_text().strip()
    except FileNotFoundError as exc:
        raise CorruptBundle(f"{resource} v{version} is incomplete: {exc}") from None
    digest = hashlib.sha256(raw).hexdigest()
    if digest != stored or digest != manifest.get("checksum"):
        raise CorruptBundle(f"{resource} v{version}: checksum mismatch")
    try:
        bundle = ModelBundle.from_payload(json.loads(raw), version=version)
        bundle.check()
    except (KeyError, TypeError, ValueError, InvariantViolation) as exc:
        raise CorruptBundle(f"{resource} v{version}: invalid payload: {exc}") from None
    if manifest.get("resource") != resource or bundle.resource != resource:
        raise CorruptBundle(f"{resource} v{version}: resource mismatch")
    return bundle


def list_versions(repo_path, resource) -> list[tuple[int, str, float | None]]:
    out = []
    for v in _versions(repo_path, resource):
        d = Path(repo_path) / resource / str(v)
        try:
            manifest = json.loads((d / MANIFEST).read_text())
            metrics = json.loads((d / PAYLOAD).read_bytes()).get("training_metrics") or {}
        except (OSError, ValueError):
            continue
        out.append((v, manifest.get("trained_at"), metrics.get("accuracy")))
    return out
