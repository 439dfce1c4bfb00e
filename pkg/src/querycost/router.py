"""Discrete-tick simulation of routing queries across SQL engine clusters.

Each cluster runs up to ``max_concurrency`` queries under processor sharing:
every tick its ``cpu_capacity`` CPU-seconds are split evenly (water-filling)
across running queries; excess arrivals wait in a FIFO queue. A cluster's
load is its outstanding true work divided by its capacity, i.e. ticks of
backlog, and load imbalance at a tick is max minus min load across clusters.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NoCluster
from .labeling import CPU_SCHEME, MEMORY_SCHEME

POLICIES = ("round_robin", "least_loaded", "predicted_cost")


@dataclass
class Job:
    arrival: int
    query: str
    cpu_cost: float  # CPU-seconds of true work
    cpu_class: int
    mem_class: int
    predicted: tuple[int, int] | None = None
    start: int | None = None
    finish: int | None = None
    cluster: int | None = None


@dataclass
class ClusterState:
    id: int
    cpu_capacity: float
    max_concurrency: int = 16
    running: list = field(default_factory=list)  # [job, remaining cost]
    queue: deque = field(default_factory=deque)
    est_work: float = 0.0  # router's estimate of outstanding work, from predicted classes
    heavy_count: int = 0  # outstanding queries the router considered heavy
    true_heavy_running: int = 0

    @property
    def outstanding(self) -> int:
        return len(self.running) + len(self.queue)

    @property
    def load(self) -> float:
        work = sum(rem for _, rem in self.running) + sum(j.cpu_cost for j in self.queue)
        return work / self.cpu_capacity

    @property
    def est_load(self) -> float:
        return self.est_work / self.cpu_capacity


@dataclass
class RoutingPolicy:
    kind: str = "round_robin"
    heavy_cap: int = 2
    class_costs: tuple[float, ...] = (3.0, 2800.0, 54000.0)
    heavy_resources: tuple[str, ...] = ("cpu",)
    _next: int = 0

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise ValueError(f"unknown policy {self.kind!r}; expected one of {POLICIES}")

    def is_heavy(self, predictions) -> bool:
        cpu, mem = predictions
        return (("cpu" in self.heavy_resources and cpu == CPU_SCHEME.heavy.index)
                or ("memory" in self.heavy_resources and mem == MEMORY_SCHEME.heavy.index))

    def estimate(self, predictions) -> float:
        return self.class_costs[predictions[0]]


def route(query, predictions, clusters, policy: RoutingPolicy) -> int | None:
    """Choose a cluster id for a query.

    ``predicted_cost`` sends predicted-heavy queries to the cluster with the
    lowest estimated load among those under the heavy cap, and light queries
    to the cluster with the most estimated headroom (lowest estimated load).
    It returns ``None`` when every cluster is at the heavy cap; the caller
    keeps the query at the router until a heavy slot frees up.
    """
    if not clusters:
        raise NoCluster("no clusters to route to")
    if policy.kind == "round_robin":
        c = clusters[policy._next % len(clusters)]
        policy._next += 1
        return c.id
    if policy.kind == "least_loaded":
        return min(clusters, key=lambda c: (c.outstanding, c.id)).id
    if policy.is_heavy(predictions):
        open_ = [c for c in clusters if c.heavy_count < policy.heavy_cap]
        if not open_:
            return None
        return min(open_, key=lambda c: (c.est_load, c.id)).id
    return min(clusters, key=lambda c: (c.est_load, c.id)).id


@dataclass
class SimulationReport:
    policy: str
    n_queries: int
    ticks: int
    max_imbalance: float
    mean_imbalance: float
    p50_queue_wait: float
    p95_queue_wait: float
    heavy_colocations: int
    max_heavy_per_cluster: int
    scaling_alerts: int
    imbalance_series: list[float] = field(default_factory=list, repr=False)

    def to_dict(self, series: bool = False) -> dict:
        d = asdict(self)
        if not series:
            d.pop("imbalance_series")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _water_fill(running, capacity):
    """Split ``capacity`` evenly across running jobs; returns the finished ones."""
    order = sorted(range(len(running)), key=lambda i: running[i][1])
    left, n = capacity, len(running)
    for pos, i in enumerate(order):
        share = left / (n - pos)
        take = min(share, running[i][1])
        running[i][1] -= take
        left -= take
    done = [r for r in running if r[1] <= 1e-9]
    running[:] = [r for r in running if r[1] > 1e-9]
    return done


def make_clusters(n: int, cpu_capacity: float, max_concurrency: int = 16) -> list[ClusterState]:
    return [ClusterState(i, cpu_capacity, max_concurrency) for i in range(n)]


def simulate(workload, clusters, policy: RoutingPolicy, predictor, alert_backlog: float = 20.0,
             max_ticks: int = 10_000_000) -> SimulationReport:
    """Run the workload to completion and summarize balance and waiting.

    ``workload`` is a list of :class:`Job` sorted by arrival tick;
    ``predictor(jobs)`` returns one ``(cpu_class, mem_class)`` per job.
    ``clusters`` is mutated; pass fresh states for each run. A scaling alert
    is counted for each tick in which predicted-heavy work arrives while the
    estimated fleet backlog exceeds ``alert_backlog`` ticks of capacity.
    """
    if not clusters:
        raise NoCluster("no clusters to route to")
    jobs = [Job(j.arrival, j.query, j.cpu_cost, j.cpu_class, j.mem_class) for j in workload]
    if any(a.arrival > b.arrival for a, b in zip(jobs, jobs[1:])):
        raise ValueError("workload must be sorted by arrival tick")
    for job, pred in zip(jobs, predictor(jobs)):
        job.predicted = (int(pred[0]), int(pred[1]))
    by_id = {c.id: c for c in clusters}
    total_capacity = sum(c.cpu_capacity for c in clusters)
    heavy_true = CPU_SCHEME.heavy.index

    held: deque[Job] = deque()
    imbalance, alerts, colocations, max_heavy = [], 0, 0, 0
    nxt, finished, t = 0, 0, 0
    while finished < len(jobs):
        if t >= max_ticks:
            raise RuntimeError("simulation did not finish within max_ticks")
        arrivals = []
        while nxt < len(jobs) and jobs[nxt].arrival <= t:
            arrivals.append(jobs[nxt])
            nxt += 1
        incoming_heavy = sum(policy.estimate(j.predicted) for j in arrivals if policy.is_heavy(j.predicted))
        backlog = sum(c.est_work for c in clusters) + sum(policy.estimate(j.predicted) for j in held)
        if incoming_heavy > 0 and (backlog + incoming_heavy) / total_capacity > alert_backlog:
            alerts += 1

        waiting, held = list(held) + arrivals, deque()
        for job in waiting:
            cid = route(job.query, job.predicted, clusters, policy)
            if cid is None:
                held.append(job)
                continue
            c = by_id[cid]
            job.cluster = cid
            c.queue.append(job)
            c.est_work += policy.estimate(job.predicted)
            if policy.is_heavy(job.predicted):
                c.heavy_count += 1
            max_heavy = max(max_heavy, c.heavy_count)

        for c in clusters:
            while c.queue and len(c.running) < c.max_concurrency:
                job = c.queue.popleft()
                job.start = t
                if job.cpu_class == heavy_true:
                    colocations += c.true_heavy_running > 0
                    c.true_heavy_running += 1
                c.running.append([job, job.cpu_cost])
            for job, _ in _water_fill(c.running, c.cpu_capacity):
                job.finish = t
                finished += 1
                c.est_work = max(0.0, c.est_work - policy.estimate(job.predicted))
                if policy.is_heavy(job.predicted):
                    c.heavy_count -= 1
                if job.cpu_class == heavy_true:
                    c.true_heavy_running -= 1
        loads = [c.load for c in clusters]
        imbalance.append(max(loads) - min(loads))
        t += 1

    waits = np.array([j.start - j.arrival for j in jobs], dtype=np.float64)
    series = np.array(imbalance)
    return SimulationReport(
        policy=policy.kind,
        n_queries=len(jobs),
        ticks=t,
        max_imbalance=float(series.max()),
        mean_imbalance=float(series.mean()),
        p50_queue_wait=float(np.percentile(waits, 50)),
        p95_queue_wait=float(np.percentile(waits, 95)),
        heavy_colocations=int(colocations),
        max_heavy_per_cluster=int(max_heavy),
        scaling_alerts=alerts,
        imbalance_series=series.tolist(),
    )


def workload_from_records(records, arrivals_per_tick: float = 10.0, seed: int = 0) -> list[Job]:
    """Poisson arrivals at the given rate; CPU cost is the logged CPU time in seconds."""
    from .labeling import classify

    rng = np.random.default_rng(seed)
    gaps = rng.exponential(1.0 / arrivals_per_tick, size=len(records))
    ticks = np.floor(np.cumsum(gaps)).astype(int)
    return [Job(int(t), r.query, r.cpu_time_ms / 1000.0, classify(r.cpu_time_ms, CPU_SCHEME).index,
                classify(r.peak_memory_bytes, MEMORY_SCHEME).index) for t, r in zip(ticks, records)]


def capacity_for_utilization(workload, n_clusters: int, utilization: float = 0.8) -> float:
    """Per-cluster capacity at which the workload keeps the fleet ``utilization`` busy."""
    span = max(1, workload[-1].arrival + 1)
    return sum(j.cpu_cost for j in workload) / span / n_clusters / utilization


def class_cost_estimates(jobs) -> tuple[float, ...]:
    """Mean true CPU cost per CPU class, as a router would learn it from history."""
    out = []
    for k in range(len(CPU_SCHEME.labels)):
        costs = [j.cpu_cost for j in jobs if j.cpu_class == k]
        if costs:
            out.append(float(np.mean(costs)))
        else:
            lo, hi = CPU_SCHEME.interval(k)
            out.append(lo / 1000.0 * 3 if hi == float("inf") else (lo + hi) / 2000.0)
    return tuple(out)


def oracle_predictor(jobs):
    return [(j.cpu_class, j.mem_class) for j in jobs]


def bundle_predictor(cpu_bundle, mem_bundle):
    def predict(jobs):
        queries = [j.query for j in jobs]
        return list(zip(cpu_bundle.predict_batch(queries).tolist(), mem_bundle.predict_batch(queries).tolist()))
    return predict
