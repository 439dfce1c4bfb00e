from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from querycost import synth
from querycost.errors import NoTemplateForClassPair
from querycost.featurize import tokenize
from querycost.labeling import CPU_SCHEME, MEMORY_SCHEME, classify
from querycost.logs import clean, parse_datehour


@pytest.fixture(scope="module")
def spec():
    return synth.default_spec()


def test_deterministic_for_seed(spec):
    assert synth.generate(spec, 200, seed=4) == synth.generate(spec, 200, seed=4)
    assert synth.generate(spec, 200, seed=4) != synth.generate(spec, 200, seed=5)


def test_records_are_clean_valid_and_ordered(spec):
    recs = synth.generate(spec, 2000, seed=1)
    assert clean(recs) == recs
    assert len({r.query_id for r in recs}) == len(recs)
    hours = [r.datehour for r in recs]
    assert hours == sorted(hours)
    start = parse_datehour(spec.start)
    assert all(0 <= (parse_datehour(h) - start).total_seconds() < 90 * 86400 for h in hours)


def test_labels_agree_with_values(spec):
    for rec, (c, m) in synth.generate_labeled(spec, 3000, seed=2):
        assert classify(rec.cpu_time_ms, CPU_SCHEME).index == c
        assert classify(rec.peak_memory_bytes, MEMORY_SCHEME).index == m


def test_class_mix_matches(spec):
    pairs = [p for _, p in synth.generate_labeled(spec, 20000, seed=3)]
    cpu = Counter(c for c, _ in pairs)
    mem = Counter(m for _, m in pairs)
    for k, target in enumerate(spec.cpu_class_mix):
        assert abs(cpu[k] / 20000 - target) < 0.015
    for k, target in enumerate(spec.mem_class_mix):
        assert abs(mem[k] / 20000 - target) < 0.015


def _owners(spec, toks):
    return [t for t in spec.template_pool if toks & set(t.slots["t"])]


def test_noise_free_templates_match_class_pair(spec):
    for rec, pair in synth.generate_labeled(spec, 300, seed=9):
        toks = set(tokenize(rec.query))
        owners = _owners(spec, toks)
        assert owners and all((t.cpu_class, t.mem_class) == pair for t in owners)


def test_every_class_pair_has_a_template(spec):
    for i in range(3):
        for j in range(3):
            assert spec.templates_for(i, j)


def test_missing_template_raises(spec):
    pool = [t for t in spec.template_pool if (t.cpu_class, t.mem_class) != (0, 0)]
    total = sum(t.weight for t in pool)
    pool = [synth.QueryTemplate(t.id, t.sql_pattern, t.cpu_class, t.mem_class, t.weight / total, t.slots)
            for t in pool]
    bad = synth.WorkloadSpec(template_pool=pool)
    with pytest.raises(NoTemplateForClassPair):
        synth.generate(bad, 500, seed=0)


def test_spec_validation_and_round_trip(tmp_path, spec):
    with pytest.raises(ValueError):
        synth.default_spec(cpu_class_mix=(0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        synth.default_spec(noise_rate=0.7)
    spec.save(tmp_path / "s.json")
    back = synth.WorkloadSpec.load(tmp_path / "s.json")
    assert synth.generate(back, 50, seed=1) == synth.generate(spec, 50, seed=1)


def test_rank_correlation_near_target(spec):
    from querycost.evaluation import rank_correlation

    recs = synth.generate(spec, 10000, seed=0)
    r = rank_correlation([x.cpu_time_ms for x in recs], [x.peak_memory_bytes for x in recs])
    assert abs(r - 0.256) <= 0.05


def test_drift_shift_replaces_templates(spec):
    shifted = synth.drift_shift(spec, 0.5, seed=1)
    changed = [a for a, b in zip(spec.template_pool, shifted.template_pool) if a.id != b.id]
    assert len(changed) in (13, 14)
    assert sum(t.weight for t in shifted.template_pool) == pytest.approx(1.0)
    old_tables = {t.slots["t"][0] for t in spec.template_pool}
    for a, b in zip(spec.template_pool, shifted.template_pool):
        assert (a.cpu_class, a.mem_class) == (b.cpu_class, b.mem_class)
        if a.id != b.id:
            assert b.slots["t"][0] not in old_tables
    with pytest.raises(ValueError):
        synth.drift_shift(spec, 0.0)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.05, 1.0), st.integers(0, 1000))
def test_drift_shift_fraction(spec, severity, seed):
    shifted = synth.drift_shift(spec, severity, seed)
    changed = sum(a.id != b.id for a, b in zip(spec.template_pool, shifted.template_pool))
    assert abs(changed - severity * len(spec.template_pool)) <= 1


def test_heavy_query_is_heavy_template(spec):
    q = synth.heavy_query(spec, "cpu", seed=0)
    toks = set(tokenize(q))
    owners = _owners(spec, toks)
    assert owners[0].cpu_class == 2


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 300), st.integers(0, 10**6))
def test_generated_values_in_class_intervals(n, seed):
    for rec, (c, m) in synth.generate_labeled(synth.default_spec(noise_rate=0.1), n, seed):
        lo, hi = CPU_SCHEME.interval(c)
        assert lo <= rec.cpu_time_ms < hi and rec.cpu_time_ms >= 1
        lo, hi = MEMORY_SCHEME.interval(m)
        assert lo <= rec.peak_memory_bytes < hi
