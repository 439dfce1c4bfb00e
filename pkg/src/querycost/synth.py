"""Synthetic query request logs with a learnable text-to-cost signal.

Class pairs are drawn through a Gaussian copula: one bivariate normal draw
``(z_cpu, z_mem)`` picks both the class (by the class-mix quantiles) and the
position inside the class interval, so raw values are monotone in the
latent uniforms and their rank correlation equals the copula's Spearman
rho. The copula correlation is set to ``2 sin(pi * rho_s / 6)``.

The text carries the signal: every template owns its table names, partition
column and column names; heavier CPU tiers use wider date-range units and
heavier memory tiers use joins, distincts and window functions.
"""

from __future__ import annotations

import json
import math
import string
from dataclasses import asdict, dataclass, field, replace
from datetime import timedelta
from pathlib import Path

import numpy as np
from scipy.stats import multivariate_normal, norm

from .errors import NoTemplateForClassPair
from .labeling import CPU_SCHEME, MEMORY_SCHEME, ClassScheme
from .logs import QueryLogRecord, format_datehour, parse_datehour

_NOUNS = """
impression engagement follower tweet session click conversion campaign advertiser account device
country language topic hashtag mention retweet reply bookmark notification search query trend moment
list space community video image media card poll event signup login payment invoice order product
catalog inventory shipment vendor partner contract ledger budget forecast metric alert incident
deploy build commit review ticket sprint release feature experiment cohort segment audience label
model feature_store embedding prediction score ranking candidate timeline home profile message thread
""".split()
_ATTRS = ["id", "ts", "country", "device", "status", "score", "amount", "type", "region", "version", "source", "owner"]
_TIERS = {
    0: ("dim", "ref", "lookup", "cache"),
    1: ("warehouse", "agg", "rollup", "mart"),
    2: ("logs", "events", "raw", "firehose"),
}
_UNITS = {0: ("hour",), 1: ("day", "week"), 2: ("month", "year")}
_RANGE_N = {0: (1, 12), 1: (1, 14), 2: (2, 24)}
_PATTERNS = {
    0: (
        "SELECT {c1}, {c2} FROM {t} WHERE {p} >= now() - interval '{n}' {u} AND {c3} = {str} LIMIT {num}",
        "SELECT {c1} FROM {t} WHERE {c2} = {num} AND {p} > now() - interval '{n}' {u}",
        "SELECT count(*) FROM {t} WHERE {p} >= now() - interval '{n}' {u} AND {c1} IS NOT NULL",
    ),
    1: (
        "SELECT {c1}, count(*) AS cnt FROM {t} WHERE {p} >= now() - interval '{n}' {u} GROUP BY {c1}",
        "SELECT {c1}, sum({c2}) FROM {t} WHERE {p} >= now() - interval '{n}' {u} AND {c3} > {num} "
        "GROUP BY {c1} HAVING sum({c2}) > {num}",
        "SELECT {c1}, approx_distinct({c2}) FROM {t} WHERE {p} >= now() - interval '{n}' {u} "
        "GROUP BY {c1} ORDER BY 2 DESC LIMIT {num}",
    ),
    2: (
        "SELECT DISTINCT a.{c1}, b.{c4} FROM {t} a JOIN {t2} b ON a.{c2} = b.{c2} "
        "WHERE a.{p} >= now() - interval '{n}' {u} ORDER BY a.{c1}",
        "SELECT {c1}, {c2}, row_number() OVER (PARTITION BY {c1} ORDER BY {c3} DESC) AS rk FROM {t} "
        "WHERE {p} >= now() - interval '{n}' {u}",
        "SELECT a.{c1}, count(DISTINCT b.{c4}) FROM {t} a JOIN {t2} b ON a.{c2} = b.{c2} "
        "WHERE a.{p} >= now() - interval '{n}' {u} GROUP BY a.{c1}",
    ),
}
_USERS = ("alice", "bob", "charley", "dana", "erin", "frank", "grace", "heidi")
_CLUSTERS = ("cluster_a", "cluster_b", "cluster_c")
_ID_CHARS = string.ascii_letters + string.digits
_SYLLABLES = "ka zo ri vu pel tan mor qui sef dra lun bex oth wim gar nys fal cor".split()


@dataclass
class QueryTemplate:
    id: str
    sql_pattern: str
    cpu_class: int
    mem_class: int
    weight: float
    slots: dict[str, list[str]] = field(default_factory=dict)

    def render(self, rng: np.random.Generator) -> str:
        lo, hi = _RANGE_N[self.cpu_class] if self.cpu_class in _RANGE_N else (1, 10)
        values = {name: opts[int(rng.integers(len(opts)))] for name, opts in self.slots.items()}
        values["n"] = str(int(rng.integers(lo, hi + 1)))
        values["num"] = str(int(rng.integers(1, 1000)))
        values["str"] = "'" + "".join(_ID_CHARS[i] for i in rng.integers(0, 52, 6)) + "'"
        return self.sql_pattern.format(**values)

    def tokens(self) -> set[str]:
        """Identifier tokens this template can emit (for vocabulary checks)."""
        from .featurize import tokenize

        out = set(tokenize(self.sql_pattern.replace("{", " ").replace("}", " ")))
        for opts in self.slots.values():
            for o in opts:
                out.update(tokenize(o))
        return out

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "QueryTemplate":
        return cls(d["id"], d["sql_pattern"], int(d["cpu_class"]), int(d["mem_class"]), float(d["weight"]),
                   {k: list(v) for k, v in d.get("slots", {}).items()})


@dataclass
class WorkloadSpec:
    template_pool: list[QueryTemplate]
    cpu_class_mix: tuple[float, float, float] = (0.72, 0.27, 0.01)
    mem_class_mix: tuple[float, float, float] = (0.34, 0.33, 0.33)
    target_correlation: float = 0.256
    noise_rate: float = 0.0
    tail_index: float = 1.5
    start: str = "2020010100"
    span_days: float = 90.0
    cpu_floor_ms: int = 1
    mem_floor_bytes: int = 1024

    def __post_init__(self):
        self.cpu_class_mix = tuple(float(x) for x in self.cpu_class_mix)
        self.mem_class_mix = tuple(float(x) for x in self.mem_class_mix)
        for mix in (self.cpu_class_mix, self.mem_class_mix):
            if len(mix) != 3 or min(mix) < 0 or abs(sum(mix) - 1) > 1e-9:
                raise ValueError(f"class mix must be 3 probabilities summing to 1, got {mix}")
        if not 0 <= self.noise_rate < 0.5:
            raise ValueError("noise_rate must lie in [0, 0.5)")
        if not -1 < self.target_correlation < 1:
            raise ValueError("target_correlation must lie in (-1, 1)")
        total = sum(t.weight for t in self.template_pool)
        if not self.template_pool or abs(total - 1) > 1e-6:
            raise ValueError(f"template weights must sum to 1, got {total}")
        parse_datehour(self.start)

    @property
    def copula_rho(self) -> float:
        return 2 * math.sin(math.pi * self.target_correlation / 6)

    def templates_for(self, cpu_class, mem_class):
        return [t for t in self.template_pool if t.cpu_class == cpu_class and t.mem_class == mem_class]

    def with_window(self, start: str, span_days: float) -> "WorkloadSpec":
        return replace(self, start=start, span_days=span_days)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["template_pool"] = [t.to_dict() for t in self.template_pool]
        return d

    @classmethod
    def from_dict(cls, d) -> "WorkloadSpec":
        d = dict(d)
        if "template_pool" in d:
            d["template_pool"] = [QueryTemplate.from_dict(t) for t in d["template_pool"]]
        else:
            d["template_pool"] = default_templates(d.get("cpu_class_mix", (0.72, 0.27, 0.01)),
                                                   d.get("mem_class_mix", (0.34, 0.33, 0.33)),
                                                   d.get("target_correlation", 0.256))
        return cls(**d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "WorkloadSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def joint_class_probs(cpu_mix, mem_mix, rho) -> np.ndarray:
    """P(cpu class i, mem class j) under the Gaussian copula."""
    ca = norm.ppf(np.clip(np.cumsum((0.0,) + tuple(cpu_mix)), 0, 1))
    ma = norm.ppf(np.clip(np.cumsum((0.0,) + tuple(mem_mix)), 0, 1))
    mvn = multivariate_normal(mean=[0, 0], cov=[[1, rho], [rho, 1]])
    big = 40.0

    def cdf(a, b):
        return float(mvn.cdf([np.clip(a, -big, big), np.clip(b, -big, big)]))

    P = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            P[i, j] = (cdf(ca[i + 1], ma[j + 1]) - cdf(ca[i], ma[j + 1])
                       - cdf(ca[i + 1], ma[j]) + cdf(ca[i], ma[j]))
    P = np.clip(P, 0, None)
    return P / P.sum()


def _make_template(tid, pattern, cpu_class, mem_class, weight, nouns, tier_db):
    main, partner = nouns
    cols = [f"{main}_{a}" for a in _ATTRS[:4]]
    return QueryTemplate(
        id=tid,
        sql_pattern=pattern,
        cpu_class=cpu_class,
        mem_class=mem_class,
        weight=weight,
        slots={
            "t": [f"{tier_db[0]}.{main}_daily", f"{tier_db[1]}.{main}"],
            "t2": [f"{tier_db[0]}.{partner}_snapshot"],
            "p": [f"{main}_datehour"],
            "u": list(_UNITS[cpu_class]),
            "c1": [cols[0]],
            "c2": [cols[1]],
            "c3": [cols[2]],
            "c4": [f"{partner}_{_ATTRS[4]}"],
        },
    )


def default_templates(cpu_mix=(0.72, 0.27, 0.01), mem_mix=(0.34, 0.33, 0.33), target_correlation=0.256,
                      per_pair: int = 3, seed: int = 20200210) -> list[QueryTemplate]:
    """A fixed pool with ``per_pair`` templates for each of the nine class pairs."""
    rng = np.random.default_rng(seed)
    rho = 2 * math.sin(math.pi * target_correlation / 6)
    P = joint_class_probs(cpu_mix, mem_mix, rho)
    nouns = list(rng.permutation(_NOUNS))
    if len(nouns) < 18 * per_pair:
        raise ValueError("not enough distinct nouns for the requested pool size")
    pool = []
    for i in range(3):
        for j in range(3):
            for t in range(per_pair):
                main, partner = nouns.pop(), nouns.pop()
                dbs = _TIERS[i]
                tier_db = (dbs[t % len(dbs)], dbs[(t + 1) % len(dbs)])
                pattern = _PATTERNS[j][t % len(_PATTERNS[j])]
                pool.append(_make_template(f"c{i}m{j}t{t}", pattern, i, j, P[i, j] / per_pair, (main, partner), tier_db))
    return pool


def default_spec(**overrides) -> WorkloadSpec:
    cpu_mix = overrides.get("cpu_class_mix", (0.72, 0.27, 0.01))
    mem_mix = overrides.get("mem_class_mix", (0.34, 0.33, 0.33))
    corr = overrides.get("target_correlation", 0.256)
    return WorkloadSpec(template_pool=default_templates(cpu_mix, mem_mix, corr), **overrides)


def _class_values(u, mix, scheme: ClassScheme, floor: int, tail_index: float):
    """Map latent uniforms to (class index, integer value) arrays."""
    cum = np.cumsum(mix)
    cls = np.minimum(np.searchsorted(cum, u, side="right"), 2)
    lo_q = np.concatenate([[0.0], cum[:-1]])[cls]
    width = np.asarray(mix)[cls]
    pos = np.clip((u - lo_q) / np.where(width > 0, width, 1), 0.0, 1.0 - 1e-9)
    b0, b1 = scheme.boundaries
    lows = np.array([floor, b0, b1], dtype=np.float64)[cls]
    highs = np.array([b0, b1, np.inf])[cls]
    vals = np.empty(len(u))
    bounded = cls < 2
    # log-uniform inside the bounded classes
    vals[bounded] = np.exp(np.log(lows[bounded]) + pos[bounded] * (np.log(highs[bounded]) - np.log(lows[bounded])))
    # Pareto tail above the top boundary
    vals[~bounded] = lows[~bounded] * (1.0 - pos[~bounded]) ** (-1.0 / tail_index)
    ints = np.floor(vals).astype(object)
    out = []
    for c, v, lo, hi in zip(cls, ints, lows, highs):
        v = max(int(lo), int(v))
        if math.isfinite(hi):
            v = min(v, int(hi) - 1)
        out.append(v)
    return cls, out


def _query_id(rng, seen):
    while True:
        qid = "".join(_ID_CHARS[i] for i in rng.integers(0, len(_ID_CHARS), 10))
        if qid not in seen:
            seen.add(qid)
            return qid


def generate(spec: WorkloadSpec, n: int, seed: int = 0) -> list[QueryLogRecord]:
    """Sample ``n`` records, ordered by datehour."""
    return [rec for rec, _ in generate_labeled(spec, n, seed)]


def generate_labeled(spec: WorkloadSpec, n: int, seed: int = 0) -> list[tuple[QueryLogRecord, tuple[int, int]]]:
    """Like :func:`generate`, pairing each record with its sampled (cpu, memory) class pair."""
    if n <= 0:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    rho = spec.copula_rho
    z1 = rng.standard_normal(n)
    z2 = rho * z1 + math.sqrt(1 - rho * rho) * rng.standard_normal(n)
    cpu_cls, cpu_vals = _class_values(norm.cdf(z1), spec.cpu_class_mix, CPU_SCHEME, spec.cpu_floor_ms, spec.tail_index)
    mem_cls, mem_vals = _class_values(norm.cdf(z2), spec.mem_class_mix, MEMORY_SCHEME, spec.mem_floor_bytes,
                                      spec.tail_index)

    by_pair = {}
    for i in range(3):
        for j in range(3):
            ts = spec.templates_for(i, j)
            if ts:
                w = np.array([t.weight for t in ts])
                by_pair[i, j] = (ts, w / w.sum() if w.sum() > 0 else np.full(len(ts), 1 / len(ts)))
    pool_w = np.array([t.weight for t in spec.template_pool])
    pool_w = pool_w / pool_w.sum()

    start = parse_datehour(spec.start)
    span_hours = max(1, int(round(spec.span_days * 24)))
    hours = np.sort(rng.integers(0, span_hours, n))
    seen = set()
    out = []
    for k in range(n):
        pair = (int(cpu_cls[k]), int(mem_cls[k]))
        if pair not in by_pair:
            raise NoTemplateForClassPair(f"no template for cpu class {pair[0]}, memory class {pair[1]}")
        if spec.noise_rate > 0 and rng.random() < spec.noise_rate:
            tmpl = spec.template_pool[int(rng.choice(len(pool_w), p=pool_w))]
        else:
            ts, w = by_pair[pair]
            tmpl = ts[int(rng.choice(len(ts), p=w))] if len(ts) > 1 else ts[0]
        out.append((QueryLogRecord(
            query_id=_query_id(rng, seen),
            user=_USERS[int(rng.integers(len(_USERS)))],
            cluster=_CLUSTERS[int(rng.integers(len(_CLUSTERS)))],
            query=tmpl.render(rng),
            cpu_time_ms=cpu_vals[k],
            peak_memory_bytes=mem_vals[k],
            datehour=format_datehour(start + timedelta(hours=int(hours[k]))),
        ), pair))
    return out


def _fresh_name(rng, taken):
    while True:
        parts = rng.choice(_SYLLABLES, size=3)
        name = "".join(parts)
        if name not in taken:
            taken.add(name)
            return name


def drift_shift(spec: WorkloadSpec, severity: float, seed: int = 0) -> WorkloadSpec:
    """Replace a ``severity`` fraction of the templates with unseen ones.

    A replacement keeps the class pair and weight of the template it
    replaces, but borrows the query shape, columns and date-range unit of
    a template from a different class pair, and gets fresh table and
    partition-column names. Old models therefore see familiar columns
    pointing at the wrong class.
    """
    if not 0 < severity <= 1:
        raise ValueError("severity must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    pool = list(spec.template_pool)
    taken = set()
    for t in pool:
        taken |= t.tokens()
    order = sorted(range(len(pool)), key=lambda i: ((pool[i].cpu_class, pool[i].mem_class), rng.random()))
    acc = rng.random()
    replaced = []
    for i in order:
        acc += severity
        if acc >= 1:
            acc -= 1
            replaced.append(i)
    new_pool = list(pool)
    for i in replaced:
        old = pool[i]
        donors = [t for t in pool if t.cpu_class != old.cpu_class and t.mem_class != old.mem_class]
        donors = donors or [t for t in pool if (t.cpu_class, t.mem_class) != (old.cpu_class, old.mem_class)] or [old]
        src = donors[int(rng.integers(len(donors)))]
        main, partner = _fresh_name(rng, taken), _fresh_name(rng, taken)
        db = _fresh_name(rng, taken)
        slots = {k: list(v) for k, v in src.slots.items()}
        slots["t"] = [f"{db}.{main}_daily", f"{db}.{main}"]
        slots["t2"] = [f"{db}.{partner}_snapshot"]
        slots["p"] = [f"{main}_datehour"]
        new_pool[i] = QueryTemplate(f"{old.id}-d{seed}", src.sql_pattern, old.cpu_class, old.mem_class, old.weight, slots)
    return replace(spec, template_pool=new_pool)


def heavy_query(spec: WorkloadSpec, resource: str = "cpu", seed: int = 0) -> str:
    """Render one query from a template in the top class of ``resource``."""
    rng = np.random.default_rng(seed)
    ts = [t for t in spec.template_pool if (t.cpu_class if resource == "cpu" else t.mem_class) == 2]
    ts.sort(key=lambda t: -t.weight)
    return ts[0].render(rng)


