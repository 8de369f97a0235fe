"""Comment records, file ingestion and the cleaning pipeline.

A corpus is a flat, sorted list of :class:`CommentRecord`. Cleaning removes
server-side duplicates, shared/anonymous accounts and users with too few
comments; :func:`group_by_user` then turns the cleaned corpus into
per-user :class:`UserProfile` objects, which is what the feature code works on.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, replace
from datetime import datetime, timezone, tzinfo
from pathlib import Path
from typing import Iterable, Iterator, Mapping
from zoneinfo import ZoneInfo

logger = logging.getLogger(__name__)

PAID = "paid"
NORMAL = "normal"
LABELS = (PAID, NORMAL)

FIELDS = (
    "report_id",
    "sequence_no",
    "post_time",
    "post_location",
    "user_id",
    "content",
    "is_reply",
)

# fraction of structurally malformed rows above which ingestion gives up
MAX_MALFORMED_FRACTION = 0.10

_TRUE = {"1", "true", "t", "yes", "y", "reply"}
_FALSE = {"0", "false", "f", "no", "n", "new", ""}


class IngestError(ValueError):
    """Raised when an input file is unusable as a whole."""


@dataclass(frozen=True)
class RecordError:
    line: int
    message: str
    # timestamp problems are record-level; everything else counts as malformed
    malformed: bool = True

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


@dataclass(frozen=True)
class CommentRecord:
    report_id: str
    sequence_no: int
    post_time: int  # UTC epoch seconds
    post_location: str
    user_id: str
    content: str
    is_reply: bool

    def to_json(self) -> dict:
        return {
            "report_id": self.report_id,
            "sequence_no": self.sequence_no,
            "post_time": self.post_time,
            "post_location": self.post_location,
            "user_id": self.user_id,
            "content": self.content,
            "is_reply": self.is_reply,
        }


def _sort_key(rec: CommentRecord):
    return (rec.report_id, rec.sequence_no)


@dataclass(frozen=True)
class Corpus:
    records: tuple[CommentRecord, ...] = ()
    label_map: Mapping[str, str] | None = None
    errors: tuple[RecordError, ...] = ()

    def __post_init__(self):
        recs = tuple(sorted(self.records, key=_sort_key))
        object.__setattr__(self, "records", recs)

    def __len__(self) -> int:
        return len(self.records)

    def user_ids(self) -> set[str]:
        return {r.user_id for r in self.records}


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    comments: tuple[CommentRecord, ...]
    label: str | None = None

    def __post_init__(self):
        if not self.comments:
            raise ValueError(f"profile {self.user_id!r} has no comments")
        if any(c.user_id != self.user_id for c in self.comments):
            raise ValueError(f"profile {self.user_id!r} holds foreign comments")
        ordered = tuple(sorted(self.comments, key=lambda c: (c.post_time, c.report_id, c.sequence_no)))
        object.__setattr__(self, "comments", ordered)

    def __len__(self) -> int:
        return len(self.comments)


@dataclass(frozen=True)
class CleaningConfig:
    min_comments: int = 4
    excluded_user_ids: frozenset[str] = frozenset({"Mobile User"})
    drop_anonymous: bool = True
    anonymous_ids: frozenset[str] = frozenset({"Anonymous"})
    dedup: bool = True

    def __post_init__(self):
        if self.min_comments < 1:
            raise ValueError("min_comments must be >= 1")
        object.__setattr__(self, "excluded_user_ids", frozenset(self.excluded_user_ids))
        object.__setattr__(self, "anonymous_ids", frozenset(self.anonymous_ids))


# --------------------------------------------------------------------------
# parsing helpers


def resolve_tz(name: str | tzinfo | None) -> tzinfo:
    if name is None:
        return timezone.utc
    if isinstance(name, tzinfo):
        return name
    if name.upper() in ("UTC", "Z"):
        return timezone.utc
    return ZoneInfo(name)


def parse_timestamp(value, tz: tzinfo = timezone.utc) -> int:
    """Parse ISO-8601 text or integer epoch seconds into UTC epoch seconds.

    Naive ISO timestamps are interpreted in ``tz``.
    """
    if isinstance(value, bool):
        raise ValueError(f"bad timestamp {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"timestamp {value!r} is not whole seconds")
        return int(value)
    text = str(value).strip()
    if not text:
        raise ValueError("empty timestamp")
    if text.lstrip("-").isdigit():
        return int(text)
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise ValueError(f"unparseable timestamp {value!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=tz)
    return int(dt.timestamp())


def format_timestamp(epoch: int) -> str:
    return datetime.fromtimestamp(epoch, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, int) and value in (0, 1):
        return bool(value)
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ValueError(f"bad is_reply value {value!r}")


class _TimestampError(ValueError):
    pass


def _build_record(raw: Mapping, tz: tzinfo) -> CommentRecord:
    missing = [f for f in FIELDS if f not in raw or raw[f] is None]
    if missing:
        raise ValueError(f"missing field(s): {', '.join(missing)}")
    try:
        seq = int(raw["sequence_no"])
    except (TypeError, ValueError):
        raise ValueError(f"bad sequence_no {raw['sequence_no']!r}") from None
    if seq < 0:
        raise ValueError(f"negative sequence_no {seq}")
    content = raw["content"]
    if not isinstance(content, str):
        raise ValueError("content is not text")
    try:
        ts = parse_timestamp(raw["post_time"], tz)
    except ValueError as exc:
        raise _TimestampError(str(exc)) from None
    return CommentRecord(
        report_id=str(raw["report_id"]),
        sequence_no=seq,
        post_time=ts,
        post_location=str(raw["post_location"] or ""),
        user_id=str(raw["user_id"]).strip(),
        content=content,
        is_reply=parse_bool(raw["is_reply"]),
    )


def _header_tz(line: str) -> str | None:
    # "# tz=Asia/Shanghai"
    body = line.lstrip("#").strip()
    key, sep, val = body.partition("=")
    if sep and key.strip().lower() in ("tz", "timezone"):
        return val.strip()
    return None


def _split_directives(lines: list[str]) -> tuple[str | None, int]:
    """Return (declared zone, number of leading directive lines)."""
    tz_name = None
    n = 0
    for line in lines:
        if not line.startswith("#"):
            break
        tz_name = _header_tz(line) or tz_name
        n += 1
    return tz_name, n


def _iter_delimited(lines: list[str], first_line: int, delimiter: str) -> Iterator[tuple[int, dict | Exception]]:
    reader = csv.DictReader(lines, delimiter=delimiter)
    if reader.fieldnames is None:
        return
    header = [h.strip() for h in reader.fieldnames]
    absent = [f for f in FIELDS if f not in header]
    if absent:
        raise IngestError(f"header lacks field(s): {', '.join(absent)}")
    reader.fieldnames = header
    while True:
        try:
            row = next(reader)
        except StopIteration:
            return
        except csv.Error as exc:
            yield first_line + reader.line_num - 1, exc
            continue
        line_no = first_line + reader.line_num - 1
        if None in row or any(v is None for v in row.values()):
            yield line_no, ValueError("wrong number of fields")
            continue
        yield line_no, row


def _iter_jsonl(lines: list[str], first_line: int) -> Iterator[tuple[int, dict | Exception]]:
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            yield first_line + i, ValueError(f"invalid JSON: {exc.msg}")
            continue
        if not isinstance(obj, dict):
            yield first_line + i, ValueError("record is not an object")
            continue
        yield first_line + i, obj


def ingest(
    path: str | Path,
    format: str | None = None,
    *,
    tz: str | tzinfo | None = None,
    delimiter: str = ",",
    labels: str | Path | None = None,
) -> Corpus:
    """Read a comment file into a :class:`Corpus`.

    ``format`` is ``"csv"`` (delimited text with a header row) or ``"jsonl"``
    (one JSON object per line); when omitted it is guessed from the suffix.
    A leading ``# tz=<zone>`` line declares the zone of naive timestamps and
    takes precedence over ``tz``.

    Bad rows are collected in ``Corpus.errors`` with their line numbers. If
    more than 10% of the rows are structurally malformed the whole file is
    rejected with :class:`IngestError`.
    """
    path = Path(path)
    if format is None:
        format = "jsonl" if path.suffix.lower() in (".jsonl", ".ndjson", ".json") else "csv"
    if format in ("delimited", "delimited-text", "tsv"):
        format = "csv"
    if format == "csv" and path.suffix.lower() == ".tsv" and delimiter == ",":
        delimiter = "\t"
    if format in ("line-delimited-structured", "ndjson"):
        format = "jsonl"
    if format not in ("csv", "jsonl"):
        raise IngestError(f"unknown format {format!r}")

    text = path.read_text(encoding="utf-8")
    lines = text.splitlines(keepends=True)
    declared, skip = _split_directives(lines)
    zone = resolve_tz(declared if declared else tz)
    body = lines[skip:]

    if format == "csv":
        rows = _iter_delimited(body, skip + 1, delimiter)
    else:
        rows = _iter_jsonl(body, skip + 1)

    records: list[CommentRecord] = []
    errors: list[RecordError] = []
    total = 0
    for line_no, row in rows:
        total += 1
        if isinstance(row, Exception):
            errors.append(RecordError(line_no, str(row)))
            continue
        try:
            records.append(_build_record(row, zone))
        except _TimestampError as exc:
            errors.append(RecordError(line_no, str(exc), malformed=False))
        except ValueError as exc:
            errors.append(RecordError(line_no, str(exc)))

    malformed = sum(e.malformed for e in errors)
    if total and malformed / total > MAX_MALFORMED_FRACTION:
        raise IngestError(
            f"{path}: {malformed} of {total} records malformed (first: {errors[0]})"
        )
    for err in errors:
        logger.warning("%s: %s", path, err)
    logger.info("%s: ingested %d records, %d errors", path, len(records), len(errors))

    label_map = load_labels(labels) if labels is not None else None
    return Corpus(tuple(records), label_map, tuple(errors))


def load_labels(path: str | Path) -> dict[str, str]:
    """Read a ``user_id<TAB>label`` file."""
    out: dict[str, str] = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\r\n").split("\t")
        if len(parts) != 2:
            raise IngestError(f"{path}:{n}: expected 'user_id<TAB>label'")
        uid, label = parts[0].strip(), parts[1].strip().lower()
        if label not in LABELS:
            raise IngestError(f"{path}:{n}: label must be paid or normal, got {label!r}")
        out[uid] = label
    return out


def write_labels(label_map: Mapping[str, str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for uid in sorted(label_map):
            fh.write(f"{uid}\t{label_map[uid]}\n")


def write_jsonl(records: Iterable[CommentRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def write_csv(records: Iterable[CommentRecord], path: str | Path, delimiter: str = ",") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(FIELDS)
        for r in records:
            writer.writerow([
                r.report_id, r.sequence_no, format_timestamp(r.post_time),
                r.post_location, r.user_id, r.content, "true" if r.is_reply else "false",
            ])


# --------------------------------------------------------------------------
# cleaning


def is_anonymous(user_id: str, cfg: CleaningConfig) -> bool:
    return not user_id.strip() or user_id in cfg.anonymous_ids


def clean(corpus: Corpus, cfg: CleaningConfig | None = None) -> Corpus:
    """Apply dedup, excluded-id, anonymous and min-comment filters in that order."""
    cfg = cfg or CleaningConfig()
    records = list(corpus.records)

    if cfg.dedup:
        seen: set[tuple] = set()
        kept = []
        for r in records:
            key = (r.report_id, r.user_id, r.post_time, r.content)
            if key in seen:
                continue
            seen.add(key)
            kept.append(r)
        records = kept

    records = [r for r in records if r.user_id not in cfg.excluded_user_ids]
    if cfg.drop_anonymous:
        records = [r for r in records if not is_anonymous(r.user_id, cfg)]

    counts: dict[str, int] = defaultdict(int)
    for r in records:
        counts[r.user_id] += 1
    records = [r for r in records if counts[r.user_id] >= cfg.min_comments]

    logger.debug("clean: %d -> %d records", len(corpus.records), len(records))
    return replace(corpus, records=tuple(records), errors=())


def group_by_user(corpus: Corpus) -> list[UserProfile]:
    """One time-ordered profile per user, sorted by user id."""
    buckets: dict[str, list[CommentRecord]] = defaultdict(list)
    for r in corpus.records:
        buckets[r.user_id].append(r)
    labels = corpus.label_map or {}
    return [
        UserProfile(uid, tuple(buckets[uid]), labels.get(uid))
        for uid in sorted(buckets)
    ]
