"""Windowed re-evaluation, the retraining trigger and the retrain/publish loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from datetime import timedelta

from .bundle import ModelBundle
from .errors import EmptyWindow
from .evaluation import EvalReport, evaluate_predictions
from .labeling import CostClass, LabeledExample, label_records
from .logs import QueryLogRecord, clean, format_datehour, parse_datehour
from .pipeline import RESOURCES, publish, train_bundles
from .repo import load_bundle

log = logging.getLogger(__name__)


@dataclass
class MonitorWindow:
    window_index: int
    examples: list[LabeledExample]

    @classmethod
    def from_records(cls, window_index: int, records) -> "MonitorWindow":
        return cls(window_index, label_records(records))


def join_outcomes(requests, completed) -> list[QueryLogRecord]:
    """Attach measured costs to served requests by ``query_id``.

    ``requests`` yields ``(query_id, query)`` pairs as seen at prediction
    time; ``completed`` holds log records of finished queries. Requests
    without a completed record are left out.
    """
    by_id = {}
    for r in completed:
        by_id.setdefault(r.query_id, r)
    out = []
    for qid, query in requests:
        r = by_id.get(qid)
        if r is not None:
            out.append(replace(r, query=query))
    return out


@dataclass
class DriftState:
    history: dict[str, list[EvalReport]] = field(default_factory=lambda: {r: [] for r in RESOURCES})
    window_indices: list[int] = field(default_factory=list)
    last_retrain_window: int | None = None

    def record(self, window_index: int, reports: dict[str, EvalReport]) -> None:
        if self.window_indices and window_index != self.window_indices[-1] + 1:
            raise ValueError(f"window {window_index} does not follow {self.window_indices[-1]}")
        self.window_indices.append(window_index)
        for resource, report in reports.items():
            self.history[resource].append(report)


def evaluate_window(bundle: ModelBundle, window: MonitorWindow) -> EvalReport:
    """Score ``bundle`` on a window through the full featurize + predict path."""
    if not window.examples:
        raise EmptyWindow(f"window {window.window_index} has no labeled examples")
    y = [e.target(bundle.resource) for e in window.examples]
    pred = bundle.predict_batch([e.query for e in window.examples])
    return evaluate_predictions(y, pred, len(bundle.scheme.labels), bundle.scheme.labels)


def should_retrain(report: EvalReport, heavy_class: CostClass, threshold: float = 0.9) -> bool:
    """True iff both precision and recall of the heavy class fall below ``threshold``."""
    i = heavy_class.index
    return report.precision[i] < threshold and report.recall[i] < threshold


def retrain_and_publish(repo_path, recent_logs, previous_hp_cpu, previous_hp_mem, model_kind=None,
                        vectorizer_kind=None, seed: int = 0) -> tuple[int, int]:
    """Retrain both resources with their deployed hyperparameters and save them.

    The model and vectorizer kinds default to those of the latest bundles.
    """
    if model_kind is None or vectorizer_kind is None:
        current = load_bundle(repo_path, "cpu", "latest")
        model_kind = model_kind or current.model_kind
        vectorizer_kind = vectorizer_kind or current.vectorizer_kind
    result = train_bundles(recent_logs, model_kind, vectorizer_kind, seed=seed,
                           hyperparameters={"cpu": previous_hp_cpu, "memory": previous_hp_mem})
    versions = publish(repo_path, result)
    log.info("retrained and published cpu v%d, memory v%d", versions["cpu"], versions["memory"])
    return versions["cpu"], versions["memory"]


@dataclass
class WindowReport:
    window_index: int
    resource: str
    accuracy: float
    heavy_precision: float
    heavy_recall: float
    retrain_triggered: bool

    def to_dict(self) -> dict:
        return {
            "window_index": self.window_index,
            "resource": self.resource,
            "accuracy": self.accuracy,
            "heavy_precision": self.heavy_precision,
            "heavy_recall": self.heavy_recall,
            "retrain_triggered": self.retrain_triggered,
        }


class Monitor:
    """Single-threaded monitoring loop over consecutive windows.

    Completed-query logs are buffered so that a retrain can use the
    ``retrain_days`` ending at the trigger. ``on_publish(resource, version)``
    is called after each new bundle is saved (e.g. to ask serving to reload).
    """

    def __init__(self, repo_path, history_logs=(), retrain_days: int = 90, threshold: float = 0.9,
                 seed: int = 0, on_publish=None):
        self.repo_path = repo_path
        self.retrain_days = retrain_days
        self.threshold = threshold
        self.seed = seed
        self.on_publish = on_publish
        self.buffer: list[QueryLogRecord] = list(history_logs)
        self.bundles = {r: load_bundle(repo_path, r, "latest") for r in RESOURCES}
        self.state = DriftState()

    def recent_logs(self) -> list[QueryLogRecord]:
        if not self.buffer:
            return []
        newest = max(r.datehour for r in self.buffer)
        cutoff = format_datehour(parse_datehour(newest) - timedelta(days=self.retrain_days))
        return [r for r in self.buffer if r.datehour >= cutoff]

    def observe(self, window_index: int, records) -> list[WindowReport]:
        records = clean(records)
        window = MonitorWindow.from_records(window_index, records)
        self.buffer.extend(records)
        reports = {r: evaluate_window(self.bundles[r], window) for r in RESOURCES}
        self.state.record(window_index, reports)
        fired = {r: should_retrain(reports[r], self.bundles[r].scheme.heavy, self.threshold) for r in RESOURCES}
        out = []
        for r in RESOURCES:
            heavy = self.bundles[r].scheme.heavy.index
            rep = reports[r]
            out.append(WindowReport(window_index, r, rep.accuracy, rep.precision[heavy], rep.recall[heavy], fired[r]))
        if any(fired.values()):
            log.warning("window %d: heavy-class quality below %.2f for %s; retraining", window_index,
                        self.threshold, [r for r in RESOURCES if fired[r]])
            self.retrain()
            self.state.last_retrain_window = window_index
        return out

    def retrain(self) -> tuple[int, int]:
        cpu, mem = self.bundles["cpu"], self.bundles["memory"]
        versions = retrain_and_publish(self.repo_path, self.recent_logs(), cpu.hyperparameters, mem.hyperparameters,
                                       cpu.model_kind, cpu.vectorizer_kind, self.seed)
        for resource, version in zip(RESOURCES, versions):
            self.bundles[resource] = load_bundle(self.repo_path, resource, version)
            if self.on_publish is not None:
                self.on_publish(resource, version)
        return versions


def drift_scenario(repo_path, spec, n_windows: int = 8, drift_at: int | None = 4, severity: float = 0.5,
                   window_size: int = 5000, train_size: int = 30000, model_kind: str = "gbt",
                   vectorizer: str = "tfidf", hyperparameters=None, seed: int = 0,
                   on_publish=None) -> tuple[list[WindowReport], Monitor]:
    """Train on 90 days of synthetic logs, then monitor weekly windows.

    Windows from ``drift_at`` onwards are drawn from ``drift_shift(spec,
    severity)``; ``drift_at=None`` keeps the stream unshifted.
    """
    from .synth import drift_shift, generate

    start = parse_datehour(spec.start)
    history = generate(spec.with_window(spec.start, 90), train_size, seed)
    hp = hyperparameters
    if hp is not None and not (isinstance(hp, dict) and set(hp) == set(RESOURCES)):
        hp = {r: hp for r in RESOURCES}
    result = train_bundles(history, model_kind, vectorizer, hyperparameters=hp, seed=seed)
    publish(repo_path, result)

    shifted = drift_shift(spec, severity, seed + 1) if drift_at is not None else None
    monitor = Monitor(repo_path, history, seed=seed, on_publish=on_publish)
    reports = []
    for w in range(1, n_windows + 1):
        window_start = format_datehour(start + timedelta(days=90 + 7 * (w - 1)))
        source = shifted if drift_at is not None and w >= drift_at else spec
        records = generate(source.with_window(window_start, 7), window_size, seed + 100 + w)
        reports.extend(monitor.observe(w, records))
    return reports, monitor
