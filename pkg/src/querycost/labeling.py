"""Discretization of CPU time and peak memory into three ordered classes."""

from __future__ import annotations

import bisect
import logging
import random
from collections import Counter
from dataclasses import dataclass

from .errors import InsufficientData

log = logging.getLogger(__name__)

SECOND_MS = 1_000
HOUR_MS = 3_600 * SECOND_MS
MB = 10**6
TB = 10**12


@dataclass(frozen=True)
class CostClass:
    index: int
    label: str


@dataclass(frozen=True)
class ClassScheme:
    """Two thresholds splitting ``[0, inf)`` into ``[0,b0) [b0,b1) [b1,inf)``."""

    resource: str
    boundaries: tuple[int, int]
    labels: tuple[str, str, str]

    def __post_init__(self):
        b0, b1 = self.boundaries
        if not 0 < b0 < b1:
            raise ValueError(f"boundaries must be strictly increasing and positive, got {self.boundaries}")
        if len(set(self.labels)) != 3:
            raise ValueError("class labels must be distinct")

    @property
    def classes(self) -> tuple[CostClass, ...]:
        return tuple(CostClass(i, lab) for i, lab in enumerate(self.labels))

    @property
    def heavy(self) -> CostClass:
        return CostClass(2, self.labels[2])

    def interval(self, index: int) -> tuple[int, float]:
        edges = (0, *self.boundaries, float("inf"))
        return edges[index], edges[index + 1]

    def index_of(self, label: str) -> int:
        return self.labels.index(label)

    def to_dict(self) -> dict:
        return {"resource": self.resource, "boundaries": list(self.boundaries), "labels": list(self.labels)}

    @classmethod
    def from_dict(cls, d) -> "ClassScheme":
        return cls(d["resource"], tuple(d["boundaries"]), tuple(d["labels"]))


CPU_SCHEME = ClassScheme("cpu", (30 * SECOND_MS, 5 * HOUR_MS), ("[0, 30s)", "[30s, 5h)", "[5h, )"))
MEMORY_SCHEME = ClassScheme("memory", (MB, TB), ("[0, 1MB)", "[1MB, 1TB)", "[1TB, )"))
SCHEMES = {"cpu": CPU_SCHEME, "memory": MEMORY_SCHEME}


def classify(value: int, scheme: ClassScheme) -> CostClass:
    if value < 0:
        raise ValueError("resource values are non-negative")
    i = bisect.bisect_right(scheme.boundaries, value)
    return CostClass(i, scheme.labels[i])


@dataclass(frozen=True)
class LabeledExample:
    query: str
    cpu_class: CostClass
    mem_class: CostClass

    def target(self, resource: str) -> int:
        return (self.cpu_class if resource == "cpu" else self.mem_class).index


def class_distribution(examples) -> dict[str, dict[str, int]]:
    cpu = Counter(e.cpu_class.label for e in examples)
    mem = Counter(e.mem_class.label for e in examples)
    return {
        "cpu": {lab: cpu.get(lab, 0) for lab in CPU_SCHEME.labels},
        "memory": {lab: mem.get(lab, 0) for lab in MEMORY_SCHEME.labels},
    }


def label_records(records, cpu_scheme=CPU_SCHEME, mem_scheme=MEMORY_SCHEME) -> list[LabeledExample]:
    out = [
        LabeledExample(r.query, classify(r.cpu_time_ms, cpu_scheme), classify(r.peak_memory_bytes, mem_scheme))
        for r in records
    ]
    if out:
        log.info("class distribution: %s", class_distribution(out))
    return out


def stratified_split(strata, train_fraction=0.8, seed=0):
    """Return ``(train_idx, test_idx)`` sorted index lists, stratified on ``strata``.

    Per-stratum train sizes use largest-remainder rounding, so the total is
    ``round(n * train_fraction)`` and every stratum is within one item of its
    exact share. Both sides keep at least one item of every stratum.
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    groups: dict = {}
    for i, s in enumerate(strata):
        groups.setdefault(s, []).append(i)
    keys = sorted(groups)
    for key in keys:
        if len(groups[key]) < 2:
            raise InsufficientData(f"class {key!r} has {len(groups[key])} example(s); need at least 2")
    exact = {k: len(groups[k]) * train_fraction for k in keys}
    sizes = {k: int(exact[k]) for k in keys}
    leftover = int(round(len(strata) * train_fraction)) - sum(sizes.values())
    for k in sorted(keys, key=lambda k: -(exact[k] - sizes[k]))[:max(leftover, 0)]:
        sizes[k] += 1

    rng = random.Random(seed)
    train, test = [], []
    for key in keys:
        idx = groups[key]
        rng.shuffle(idx)
        n_train = min(max(sizes[key], 1), len(idx) - 1)
        train.extend(idx[:n_train])
        test.extend(idx[n_train:])
    return sorted(train), sorted(test)


def split(examples, train_fraction=0.8, seed=0):
    """Stratified (on the CPU class) train/test partition."""
    tr, te = stratified_split([e.cpu_class.index for e in examples], train_fraction, seed)
    return [examples[i] for i in tr], [examples[i] for i in te]
