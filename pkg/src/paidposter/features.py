"""Per-user behavioural features.

All functions take a :class:`~paidposter.corpus.UserProfile` and are pure.
Raw values are kept (seconds, day counts); scaling happens in the classifier.
"""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass
from datetime import datetime, timezone, tzinfo
from pathlib import Path
from statistics import fmean
from typing import IO, Iterable, Sequence

from .corpus import LABELS, CommentRecord, IngestError, UserProfile, resolve_tz

EPOCH_GAP_S = 86400
# returned when no epoch holds two comments
INTERVAL_SENTINEL_S = 86400.0

FEATURE_NAMES = ("reply_ratio", "avg_interval_s", "active_days", "num_reports", "similar_pairs")

# feature-set sizes understood by the classifier and CLI
FEATURE_SETS = {
    2: (0, 1),
    4: (0, 1, 2, 3),
    5: (0, 1, 2, 3, 4),
}


@dataclass(frozen=True)
class FeatureVector:
    reply_ratio: float
    avg_interval_s: float
    active_days: int
    num_reports: int
    similar_pairs: int

    def as_list(self) -> list[float]:
        return [float(v) for v in astuple(self)]

    def __len__(self) -> int:
        return 5


def reply_ratio(profile: UserProfile) -> float:
    return sum(c.is_reply for c in profile.comments) / len(profile.comments)


def split_epochs(profile: UserProfile, gap_s: int = EPOCH_GAP_S) -> list[list[CommentRecord]]:
    """Cut the timeline wherever two consecutive comments are more than ``gap_s`` apart."""
    epochs: list[list[CommentRecord]] = []
    prev = None
    for c in profile.comments:
        if prev is None or c.post_time - prev > gap_s:
            epochs.append([])
        epochs[-1].append(c)
        prev = c.post_time
    return epochs


def avg_interval(profile: UserProfile, sentinel: float = INTERVAL_SENTINEL_S) -> float:
    """Unweighted mean over epochs of the mean gap inside each epoch."""
    means = []
    for ep in split_epochs(profile):
        if len(ep) < 2:
            continue
        means.append((ep[-1].post_time - ep[0].post_time) / (len(ep) - 1))
    return fmean(means) if means else float(sentinel)


def active_days(profile: UserProfile, tz: str | tzinfo | None = None) -> int:
    zone = resolve_tz(tz)
    return len({
        datetime.fromtimestamp(c.post_time, tz=timezone.utc).astimezone(zone).date()
        for c in profile.comments
    })


def num_reports(profile: UserProfile) -> int:
    return len({c.report_id for c in profile.comments})


def extract(profile: UserProfile, similar_pairs: int, tz: str | tzinfo | None = None) -> FeatureVector:
    return FeatureVector(
        reply_ratio=reply_ratio(profile),
        avg_interval_s=avg_interval(profile),
        active_days=active_days(profile, tz),
        num_reports=num_reports(profile),
        similar_pairs=int(similar_pairs),
    )


# --------------------------------------------------------------------------
# feature dump: user_id, five features, optional label


@dataclass(frozen=True)
class FeatureRow:
    user_id: str
    features: FeatureVector
    label: str | None = None


def write_features(rows: Iterable[FeatureRow], dest: str | Path | IO[str]) -> None:
    """Write rows sorted by user id; ``dest`` is a path or an open text file."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_features(rows, fh)
        return
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(("user_id",) + FEATURE_NAMES + ("label",))
    for row in sorted(rows, key=lambda r: r.user_id):
        f = row.features
        w.writerow([
            row.user_id, repr(f.reply_ratio), repr(f.avg_interval_s),
            f.active_days, f.num_reports, f.similar_pairs, row.label or "",
        ])


def read_features(path: str | Path) -> list[FeatureRow]:
    rows: list[FeatureRow] = []
    with open(path, encoding="utf-8", newline="") as fh:
        for n, rec in enumerate(csv.reader(fh), 1):
            if not rec or (n == 1 and rec[0] == "user_id"):
                continue
            if len(rec) not in (6, 7):
                raise IngestError(f"{path}:{n}: expected 6 or 7 columns, got {len(rec)}")
            label = rec[6].strip().lower() if len(rec) == 7 and rec[6].strip() else None
            if label is not None and label not in LABELS:
                raise IngestError(f"{path}:{n}: unknown label {label!r}")
            try:
                fv = FeatureVector(float(rec[1]), float(rec[2]), int(rec[3]), int(rec[4]), int(rec[5]))
            except ValueError as exc:
                raise IngestError(f"{path}:{n}: {exc}") from None
            rows.append(FeatureRow(rec[0], fv, label))
    return rows


def select(vectors: Sequence[FeatureVector], mask: Sequence[int]) -> list[list[float]]:
    return [[v.as_list()[i] for i in mask] for v in vectors]
