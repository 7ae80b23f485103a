"""Parsing and organization of raw geotagged records.

The canonical file layout is CSV with header ``user_id,lat,lon,timestamp,text``
or JSON-lines with the same field names.  Timestamps are ISO 8601 with an
explicit UTC offset; the display-style ``8/2/2014 21:58`` form is accepted
only when a legacy timezone is configured.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone, tzinfo
from typing import IO, Iterable, Iterator

from .errors import FormatMismatchError

CSV_COLUMNS = ("user_id", "lat", "lon", "timestamp", "text")
LEGACY_TIMESTAMP_FORMAT = "%m/%d/%Y %H:%M"


@dataclass(frozen=True, slots=True)
class TweetRecord:
    user_id: str
    lat: float
    lon: float
    timestamp: datetime  # timezone-aware, normalized to UTC
    text: str = ""


@dataclass(frozen=True, slots=True)
class RejectedLine:
    line_number: int
    reason: str


@dataclass(frozen=True)
class UserTimeline:
    user_id: str
    records: tuple[TweetRecord, ...]


@dataclass
class ParseResult:
    records: list[TweetRecord]
    rejects: list[RejectedLine]
    lines_read: int  # data lines, header excluded


def parse_timestamp(raw: str, legacy_tz: tzinfo | None = None) -> datetime:
    """Parse a timestamp string to an aware UTC datetime.

    Raises ValueError with a human-readable reason on failure.
    """
    text = raw.strip()
    if not text:
        raise ValueError("empty timestamp")
    iso = text[:-1] + "+00:00" if text.endswith(("Z", "z")) else text
    try:
        dt = datetime.fromisoformat(iso)
    except ValueError:
        if legacy_tz is None:
            raise ValueError(f"unparseable timestamp {text!r}")
        try:
            dt = datetime.strptime(text, LEGACY_TIMESTAMP_FORMAT)
        except ValueError:
            raise ValueError(f"unparseable timestamp {text!r}") from None
    if dt.tzinfo is None:
        if legacy_tz is None:
            raise ValueError(f"timestamp {text!r} lacks a UTC offset")
        dt = dt.replace(tzinfo=legacy_tz)
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    """Canonical serialization: ISO 8601 in UTC with a Z suffix."""
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def _validate_fields(
    user_id: str, lat_raw, lon_raw, ts_raw, text, legacy_tz: tzinfo | None
) -> TweetRecord:
    if not user_id:
        raise ValueError("missing user_id")
    try:
        lat = float(lat_raw)
        lon = float(lon_raw)
    except (TypeError, ValueError):
        raise ValueError("non-numeric coordinates")
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise ValueError("non-finite coordinates")
    if not -90.0 <= lat <= 90.0:
        raise ValueError("latitude out of range")
    if not -180.0 <= lon <= 180.0:
        raise ValueError("longitude out of range")
    ts = parse_timestamp(str(ts_raw), legacy_tz)
    return TweetRecord(user_id, lat, lon, ts, "" if text is None else str(text))


def _open_lines(source) -> Iterator[str]:
    if isinstance(source, (str, bytes)) and not isinstance(source, bytes):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            yield from fh
        return
    if isinstance(source, (io.RawIOBase, io.BufferedIOBase)) or (
        hasattr(source, "read") and isinstance(source.read(0), bytes)
    ):
        yield from io.TextIOWrapper(source, encoding="utf-8", newline="")
        return
    yield from source


def parse_records(
    source: str | IO | Iterable[str],
    format: str = "csv",
    legacy_tz: tzinfo | None = None,
) -> ParseResult:
    """Parse CSV or JSONL input into records plus a reject log.

    Malformed lines never abort the run; they are collected with their
    physical line number and a reason.  If more than half of the data lines
    are rejected the whole input is treated as a format mismatch.
    """
    if format not in ("csv", "jsonl"):
        raise ValueError(f"unknown format {format!r}")
    records: list[TweetRecord] = []
    rejects: list[RejectedLine] = []
    lines_read = 0

    if format == "csv":
        reader = csv.reader(_open_lines(source))
        header = next(reader, None)
        if header is None:
            return ParseResult(records, rejects, 0)
        if [h.strip() for h in header] != list(CSV_COLUMNS):
            raise FormatMismatchError(
                f"expected CSV header {','.join(CSV_COLUMNS)!r}, got {','.join(header)!r}"
            )
        for row in reader:
            lineno = reader.line_num
            if not row:
                continue
            lines_read += 1
            if len(row) != len(CSV_COLUMNS):
                rejects.append(RejectedLine(lineno, f"expected 5 fields, got {len(row)}"))
                continue
            try:
                records.append(_validate_fields(row[0], row[1], row[2], row[3], row[4], legacy_tz))
            except ValueError as exc:
                rejects.append(RejectedLine(lineno, str(exc)))
    else:
        for lineno, line in enumerate(_open_lines(source), start=1):
            if not line.strip():
                continue
            lines_read += 1
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("line is not a JSON object")
                records.append(
                    _validate_fields(
                        str(obj.get("user_id", "")),
                        obj.get("lat"),
                        obj.get("lon"),
                        obj.get("timestamp", ""),
                        obj.get("text", ""),
                        legacy_tz,
                    )
                )
            except (ValueError, json.JSONDecodeError) as exc:
                rejects.append(RejectedLine(lineno, str(exc)))

    if lines_read > 0 and len(rejects) * 2 > lines_read:
        raise FormatMismatchError(
            f"{len(rejects)} of {lines_read} lines rejected; input does not match the {format} schema"
        )
    return ParseResult(records, rejects, lines_read)


def write_records_csv(records: Iterable[TweetRecord], fh: IO[str]) -> None:
    """Serialize records in the canonical CSV layout (round-trip safe)."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow([r.user_id, repr(r.lat), repr(r.lon), format_timestamp(r.timestamp), r.text])


def write_rejects_csv(rejects: Iterable[RejectedLine], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["line_number", "reason"])
    for r in rejects:
        writer.writerow([r.line_number, r.reason])


def dedupe_records(records: Iterable[TweetRecord]) -> tuple[list[TweetRecord], int]:
    """Drop exact duplicates (same user, timestamp, coordinates).

    Returns the surviving records in input order and the number dropped.
    Streaming collectors re-deliver posts; exact duplicates would otherwise
    surface as zero-length displacements.
    """
    seen: set[tuple[str, datetime, float, float]] = set()
    kept: list[TweetRecord] = []
    dropped = 0
    for r in records:
        key = (r.user_id, r.timestamp, r.lat, r.lon)
        if key in seen:
            dropped += 1
        else:
            seen.add(key)
            kept.append(r)
    return kept, dropped


def build_timelines(records: Iterable[TweetRecord]) -> dict[str, UserTimeline]:
    """Partition records by user and sort each user's records by time.

    The sort is stable: records with equal timestamps keep input order.
    """
    by_user: dict[str, list[TweetRecord]] = {}
    for r in records:
        by_user.setdefault(r.user_id, []).append(r)
    return {
        uid: UserTimeline(uid, tuple(sorted(recs, key=lambda r: r.timestamp)))
        for uid, recs in by_user.items()
    }
