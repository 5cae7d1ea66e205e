"""Append-only query analytics log and the reports computed from it.

Every federated search appends one record *after* aggregation completes, so
analytics can never delay or fail a search. The log is a ``|``-delimited
UTF-8 file:

    timestamp|drug_name|lat|lon|hit_vendors

``lat``/``lon`` are empty when the search carried no location; hit_vendors
is ``;``-separated. Delimiter characters occurring inside a field are
escaped as ``%XX`` so the line format stays unambiguous.
"""

from __future__ import annotations

import math
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from .geo import GeoPoint, InvalidLocation
from .registry import format_timestamp, parse_timestamp

__all__ = [
    "QUERYLOG_HEADER",
    "QueryLogError",
    "BadBucket",
    "QueryLogRecord",
    "QueryLog",
    "ReportEntry",
    "consumption_report",
    "REPORT_BUCKETS",
]

QUERYLOG_HEADER = "timestamp|drug_name|lat|lon|hit_vendors"

REPORT_BUCKETS = ("drug", "region")

# Escapes applied to free-text fields, in this order; reversed on read.
_ESCAPES = (("%", "%25"), ("|", "%7C"), (";", "%3B"), ("\r", "%0D"), ("\n", "%0A"))


class QueryLogError(Exception):
    def __init__(self, path: os.PathLike | str, line_number: int, reason: str):
        super().__init__(f"{path}, line {line_number}: {reason}")
        self.line_number = line_number


class BadBucket(ValueError):
    """Unknown report bucket, or a region report without a positive cell size."""


def _escape(value: str) -> str:
    for raw, encoded in _ESCAPES:
        value = value.replace(raw, encoded)
    return value


def _unescape(value: str) -> str:
    for raw, encoded in reversed(_ESCAPES):
        value = value.replace(encoded, raw)
    return value


@dataclass(frozen=True)
class QueryLogRecord:
    """One analytics row: when, what was asked, where from, who answered."""

    timestamp: datetime
    drug_name: str
    search_point: GeoPoint | None = None
    hit_vendors: tuple[str, ...] = field(default_factory=tuple)

    def to_line(self) -> str:
        if self.search_point is None:
            lat = lon = ""
        else:
            lat = repr(self.search_point.latitude)
            lon = repr(self.search_point.longitude)
        vendors = ";".join(_escape(v) for v in self.hit_vendors)
        return "|".join(
            (
                format_timestamp(self.timestamp),
                _escape(self.drug_name),
                lat,
                lon,
                vendors,
            )
        )


def _parse_line(path: Path, line_number: int, line: str) -> QueryLogRecord:
    parts = line.split("|")
    if len(parts) != 5:
        raise QueryLogError(
            path, line_number, f"expected 5 |-separated fields, got {len(parts)}"
        )
    ts_text, name_text, lat_text, lon_text, vendors_text = parts
    if (lat_text == "") != (lon_text == ""):
        raise QueryLogError(path, line_number, "lat and lon must be given together")
    try:
        timestamp = parse_timestamp(ts_text)
        point = None
        if lat_text:
            point = GeoPoint(float(lat_text), float(lon_text))
    except (ValueError, InvalidLocation) as exc:
        raise QueryLogError(path, line_number, str(exc)) from None
    vendors = tuple(
        _unescape(v) for v in vendors_text.split(";") if v
    )
    return QueryLogRecord(
        timestamp=timestamp,
        drug_name=_unescape(name_text),
        search_point=point,
        hit_vendors=vendors,
    )


class QueryLog:
    """File-backed append-only log. Appends are serialized under a lock."""

    def __init__(self, path: os.PathLike | str):
        self._path = Path(path)
        self._lock = threading.Lock()

    @property
    def path(self) -> Path:
        return self._path

    def append(self, record: QueryLogRecord) -> None:
        line = record.to_line() + "\n"
        with self._lock:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            new_file = not self._path.exists()
            with open(self._path, "a", encoding="utf-8") as handle:
                if new_file:
                    handle.write(QUERYLOG_HEADER + "\n")
                handle.write(line)

    def records(self) -> list[QueryLogRecord]:
        """Read the whole log back. Missing file means no records yet."""
        try:
            text = self._path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return []
        lines = text.splitlines()
        if not lines:
            return []
        if lines[0] != QUERYLOG_HEADER:
            raise QueryLogError(
                self._path, 1, f"header must be exactly {QUERYLOG_HEADER!r}"
            )
        out = []
        for line_number, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            out.append(_parse_line(self._path, line_number, line))
        return out


@dataclass(frozen=True)
class ReportEntry:
    key: str
    count: int


def _region_key(point: GeoPoint, cell_degrees: float) -> str:
    cell_lat = math.floor(point.latitude / cell_degrees)
    cell_lon = math.floor(point.longitude / cell_degrees)
    return f"{cell_lat},{cell_lon}"


def consumption_report(
    records: list[QueryLogRecord],
    bucket: str,
    cell_degrees: float | None = None,
) -> list[ReportEntry]:
    """Count queries per bucket, ordered by descending count then key.

    bucket "drug" counts per lowercased drug name; bucket "region" counts per
    (floor(lat/cell), floor(lon/cell)) grid cell over records that carry a
    search point.
    """
    if bucket == "drug":
        counts: dict[str, int] = {}
        for record in records:
            key = record.drug_name.lower()
            counts[key] = counts.get(key, 0) + 1
    elif bucket == "region":
        if cell_degrees is None or not (
            isinstance(cell_degrees, (int, float))
            and math.isfinite(cell_degrees)
            and cell_degrees > 0
        ):
            raise BadBucket("region report needs a positive cell size in degrees")
        counts = {}
        for record in records:
            if record.search_point is None:
                continue
            key = _region_key(record.search_point, cell_degrees)
            counts[key] = counts.get(key, 0) + 1
    else:
        raise BadBucket(f"unknown bucket {bucket!r}; expected one of {REPORT_BUCKETS}")
    return [
        ReportEntry(key=key, count=count)
        for key, count in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    ]
