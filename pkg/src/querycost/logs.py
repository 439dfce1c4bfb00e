"""Query request log records: parsing, windowed loading and cleaning."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .errors import EmptyDataset, InvalidDatehour, MissingField, ParseError, TypeMismatch

log = logging.getLogger(__name__)

FIELDS = ("query_id", "user", "cluster", "query", "cpu_time_ms", "peak_memory_bytes", "datehour")
_INT_FIELDS = ("cpu_time_ms", "peak_memory_bytes")


def parse_datehour(value: str) -> datetime:
    """Parse a ``YYYYMMDDHH`` string into an aware UTC datetime."""
    if not isinstance(value, str) or len(value) != 10 or not value.isdigit():
        raise InvalidDatehour("datehour", f"InvalidDatehour('datehour'): {value!r}")
    try:
        return datetime.strptime(value, "%Y%m%d%H").replace(tzinfo=timezone.utc)
    except ValueError:
        raise InvalidDatehour("datehour", f"InvalidDatehour('datehour'): {value!r}") from None


def format_datehour(ts: datetime) -> str:
    return _as_utc(ts).strftime("%Y%m%d%H")


def _as_utc(ts: datetime) -> datetime:
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


@dataclass(frozen=True)
class QueryLogRecord:
    query_id: str
    user: str
    cluster: str
    query: str
    cpu_time_ms: int
    peak_memory_bytes: int
    datehour: str

    @property
    def timestamp(self) -> datetime:
        return parse_datehour(self.datehour)

    def is_valid(self) -> bool:
        if not self.query_id or not self.query.strip():
            return False
        for name in _INT_FIELDS:
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                return False
        try:
            parse_datehour(self.datehour)
        except InvalidDatehour:
            return False
        return True

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


def _coerce_int(name, value, from_text):
    if from_text:
        if not isinstance(value, str) or not value.strip().lstrip("-").isdigit():
            raise TypeMismatch(name)
        value = int(value.strip())
    elif isinstance(value, bool) or not isinstance(value, int):
        raise TypeMismatch(name)
    if value < 0:
        raise TypeMismatch(name, f"TypeMismatch({name!r}): negative value {value}")
    return value


def record_from_mapping(obj, from_text=False) -> QueryLogRecord:
    if not isinstance(obj, dict):
        raise TypeMismatch("<record>", "record is not an object")
    values = {}
    for name in FIELDS:
        if name not in obj or obj[name] is None:
            raise MissingField(name)
        v = obj[name]
        if name in _INT_FIELDS:
            v = _coerce_int(name, v, from_text)
        elif name == "datehour":
            # JSON writers sometimes emit the datehour as a bare number
            if isinstance(v, int) and not isinstance(v, bool):
                v = str(v)
            parse_datehour(v)
        elif not isinstance(v, str):
            raise TypeMismatch(name)
        values[name] = v
    if not values["query_id"]:
        raise MissingField("query_id")
    return QueryLogRecord(**values)


def parse_log_line(line: str, format: str = "jsonl", header=FIELDS) -> QueryLogRecord:
    """Parse one log line in ``jsonl`` or ``csv`` format.

    For CSV the column order is given by ``header`` (defaults to the
    canonical field order).
    """
    if format == "jsonl":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TypeMismatch("<line>", f"invalid JSON: {exc}") from None
        return record_from_mapping(obj)
    if format == "csv":
        rows = list(csv.reader(io.StringIO(line)))
        if len(rows) != 1:
            raise TypeMismatch("<line>", "expected exactly one CSV row")
        row = rows[0]
        obj = dict(zip(header, row))
        return record_from_mapping(obj, from_text=True)
    raise ValueError(f"unknown log format {format!r}")


class LogBatch(list):
    """List of records that also remembers how many lines were skipped."""

    def __init__(self, records=(), skipped=0):
        super().__init__(records)
        self.skipped = skipped


def _detect_format(path: Path) -> str:
    return "csv" if path.suffix.lower() == ".csv" else "jsonl"


def iter_log_file(path, format=None):
    """Yield ``(record | ParseError)`` for each non-blank line of a log file."""
    path = Path(path)
    format = format or _detect_format(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        if format == "csv":
            reader = csv.DictReader(fh)
            for row in reader:
                try:
                    yield record_from_mapping(row, from_text=True)
                except ParseError as exc:
                    yield exc
        else:
            for line in fh:
                if not line.strip():
                    continue
                try:
                    yield parse_log_line(line, "jsonl")
                except ParseError as exc:
                    yield exc


def load_logs(path, now: datetime | None = None, window_days: int | None = 90, format=None) -> LogBatch:
    """Read records from ``path`` whose datehour lies in ``[now - window_days, now]``.

    ``window_days=None`` disables the window. Malformed lines are skipped
    and counted in ``result.skipped``.
    """
    if window_days is not None and window_days <= 0:
        raise ValueError("window_days must be positive")
    now = _as_utc(now) if now is not None else datetime.now(timezone.utc)
    lo = now - timedelta(days=window_days) if window_days is not None else None
    kept, skipped = [], 0
    for item in iter_log_file(path, format):
        if isinstance(item, ParseError):
            skipped += 1
            log.debug("skipping malformed line: %s", item)
            continue
        if lo is not None:
            ts = item.timestamp
            if ts < lo or ts > now:
                continue
        kept.append(item)
    if skipped:
        log.warning("%s: skipped %d malformed line(s)", path, skipped)
    if not kept:
        raise EmptyDataset(f"no valid records in {path}")
    return LogBatch(kept, skipped)


def clean(records) -> list[QueryLogRecord]:
    """Drop unusable records and repeated query ids (first occurrence wins)."""
    seen = set()
    out = []
    for r in records:
        if not r.is_valid():
            continue
        if r.cpu_time_ms == 0 and r.peak_memory_bytes == 0:
            continue
        if r.query_id in seen:
            continue
        seen.add(r.query_id)
        out.append(r)
    if not out:
        raise EmptyDataset("all records were dropped by cleaning")
    return out


def write_jsonl(records, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(r.to_json())
            fh.write("\n")


def write_csv(records, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_NONNUMERIC, doublequote=True)
        w.writerow(FIELDS)
        for r in records:
            w.writerow([getattr(r, f) for f in FIELDS])
