import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from querycost.errors import EmptyDataset, InvalidDatehour, MissingField, TypeMismatch
from querycost.logs import (
    FIELDS, QueryLogRecord, clean, load_logs, parse_datehour, parse_log_line, write_csv, write_jsonl,
)

TABLE_ROWS = [
    ("Uh0u6ScxuJ", "alice", "cluster_a", "sql1", 10143681, 1204117281, "2020021013"),
    ("HSJb3hSEe9", "bob", "cluster_b", "sql2", 5903987, 9038118972, "2020021411"),
    ("y2cysjWzKC", "bob", "cluster_a", "sql3", 284392, 1204117281, "2020021719"),
    ("YqtRmXL8Gy", "alice", "cluster_a", "sql4", 53, 45056, "2020091516"),
    ("oMawUdJuHA", "charley", "cluster_a", "sql5", 179972, 118783230, "2020110601"),
]


def record(qid="q1", query="select 1", cpu=10, mem=10, datehour="2020021013"):
    return QueryLogRecord(qid, "u", "c", query, cpu, mem, datehour)


def line(**overrides):
    obj = dict(zip(FIELDS, TABLE_ROWS[0]))
    obj.update(overrides)
    return json.dumps(obj)


def test_parse_jsonl_table_row_1():
    r = parse_log_line(line())
    assert (r.query_id, r.cpu_time_ms, r.peak_memory_bytes, r.datehour) == (
        "Uh0u6ScxuJ", 10143681, 1204117281, "2020021013")
    assert r.user == "alice" and r.cluster == "cluster_a" and r.query == "sql1"


def test_parse_jsonl_table_row_4():
    r = parse_log_line(json.dumps(dict(zip(FIELDS, TABLE_ROWS[3]))))
    assert (r.cpu_time_ms, r.peak_memory_bytes) == (53, 45056)


def test_missing_query_field_is_reported():
    obj = json.loads(line())
    del obj["query"]
    with pytest.raises(MissingField) as exc:
        parse_log_line(json.dumps(obj))
    assert exc.value.field == "query"


@pytest.mark.parametrize("field,value", [("cpu_time_ms", "abc"), ("cpu_time_ms", -1), ("peak_memory_bytes", 1.5),
                                         ("cpu_time_ms", True)])
def test_type_mismatch_names_field(field, value):
    with pytest.raises(TypeMismatch) as exc:
        parse_log_line(line(**{field: value}))
    assert exc.value.field == field


@pytest.mark.parametrize("bad", ["2020133101", "2020023001", "2020010124", "202001010", "abcdefghij"])
def test_invalid_datehour(bad):
    with pytest.raises(InvalidDatehour):
        parse_log_line(line(datehour=bad))


def test_csv_line_with_doubled_quotes():
    r = parse_log_line('q,u,c,"select ""x"" from t",5,6,2020010100', "csv")
    assert r.query == 'select "x" from t' and r.cpu_time_ms == 5


def test_csv_and_jsonl_files_round_trip(tmp_path):
    recs = [QueryLogRecord(*row) for row in TABLE_ROWS]
    write_jsonl(recs, tmp_path / "a.jsonl")
    write_csv(recs, tmp_path / "a.csv")
    for name in ("a.jsonl", "a.csv"):
        got = load_logs(tmp_path / name, window_days=None)
        assert list(got) == recs and got.skipped == 0


def _write(path, records, extra_lines=()):
    with open(path, "w") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")
        for ln in extra_lines:
            fh.write(ln + "\n")


def test_load_logs_window(tmp_path):
    now = parse_datehour("2020060100")
    recs = [record(f"q{i}", datehour=d) for i, d in
            enumerate(["2020053100", "2020050100", "2020040100", "2020010100", "2019120100"])]
    _write(tmp_path / "l.jsonl", recs)
    assert len(load_logs(tmp_path / "l.jsonl", now)) == 3
    assert len(load_logs(tmp_path / "l.jsonl", now, window_days=400)) == 5


def test_load_logs_skips_and_counts_malformed(tmp_path):
    recs = [record(f"q{i}") for i in range(4)]
    _write(tmp_path / "l.jsonl", recs, ["{not json"])
    got = load_logs(tmp_path / "l.jsonl", window_days=None)
    assert len(got) == 4 and got.skipped == 1
    assert [r.query_id for r in got] == ["q0", "q1", "q2", "q3"]


def test_load_logs_empty_raises(tmp_path):
    (tmp_path / "e.jsonl").write_text("")
    with pytest.raises(EmptyDataset):
        load_logs(tmp_path / "e.jsonl", window_days=None)


def test_load_logs_rejects_non_positive_window(tmp_path):
    _write(tmp_path / "l.jsonl", [record()])
    with pytest.raises(ValueError):
        load_logs(tmp_path / "l.jsonl", window_days=0)


def test_clean_rules():
    a, b = record("a"), record("b")
    assert clean([a, b]) == [a, b]
    assert clean([a, record("e", query="   ")]) == [a]
    assert clean([a, record("z", cpu=0, mem=0)]) == [a]
    assert clean([record("z", cpu=0, mem=5), a]) == [record("z", cpu=0, mem=5), a]
    dup = record("a", query="select 2")
    assert clean([a, dup]) == [a]
    with pytest.raises(EmptyDataset):
        clean([record("z", cpu=0, mem=0)])


_fuzz_value = st.one_of(st.none(), st.integers(-5, 10**13), st.text(max_size=12), st.booleans(),
                        st.floats(allow_nan=False, allow_infinity=False), st.sampled_from(["2020021013", "2020023013"]))


@settings(max_examples=200, deadline=None)
@given(st.dictionaries(st.sampled_from(FIELDS), _fuzz_value, min_size=5))
def test_fuzzed_lines_either_fail_or_satisfy_invariants(obj):
    try:
        r = parse_log_line(json.dumps(obj))
    except (MissingField, TypeMismatch, InvalidDatehour):
        return
    survivors = clean([r]) if r.is_valid() and (r.cpu_time_ms or r.peak_memory_bytes) else []
    for s in survivors:
        assert s.query_id and s.query.strip()
        assert s.cpu_time_ms >= 0 and s.peak_memory_bytes >= 0
        parse_datehour(s.datehour)


records_st = st.lists(st.builds(record, qid=st.sampled_from("abcde"), query=st.sampled_from(["", "x", " y "]),
                                cpu=st.integers(0, 3), mem=st.integers(0, 3)), max_size=12)


@given(records_st)
def test_clean_is_idempotent(recs):
    try:
        once = clean(recs)
    except EmptyDataset:
        return
    assert clean(once) == once


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 24 * 200), min_size=1, max_size=15), st.integers(1, 100), st.integers(1, 100))
def test_window_monotone(tmp_path_factory, offsets, d1, d2):
    from datetime import timedelta

    from querycost.logs import format_datehour

    d1, d2 = min(d1, d2), max(d1, d2)
    now = parse_datehour("2021010100")
    recs = [record(f"q{i}", datehour=format_datehour(now - timedelta(hours=h))) for i, h in enumerate(offsets)]
    path = tmp_path_factory.mktemp("w") / "l.jsonl"
    _write(path, recs)

    def ids(d):
        try:
            return {r.query_id for r in load_logs(path, now, d)}
        except EmptyDataset:
            return set()

    assert ids(d1) <= ids(d2)
