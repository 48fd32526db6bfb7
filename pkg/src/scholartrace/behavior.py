"""Reading-habit features, field categorization, and gap imputation.

Events become sessions (gap rule), per-participant schedule features
(night and weekend work shares), and bucketed time series whose
maintenance-window gaps are filled with the mean of the same time point
one week earlier and one week later.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Sequence

from .ingest import REFERENCE_TZ, AccessEvent

DEFAULT_SESSION_GAP = timedelta(minutes=30)
NIGHT_START_HOUR = 22
NIGHT_END_HOUR = 6
WEEK = timedelta(days=7)


class EmptyInput(ValueError):
    pass


class MisalignedBucket(ValueError):
    pass


@dataclass(frozen=True)
class Session:
    uid: str
    start: datetime
    end: datetime
    event_count: int


@dataclass(frozen=True)
class ScheduleFeatures:
    uid: str
    night_fraction: float
    weekend_fraction: float
    active_days: int
    events_total: int


@dataclass(frozen=True)
class FieldDistribution:
    """Research-field shares over matched PMIDs plus match coverage."""

    shares: dict[str, float]
    coverage: float
    matched: int
    total: int


@dataclass(frozen=True)
class TimeSeries:
    """Event counts per bucket with per-bucket missing flags.

    ``bucket_width`` must divide one week evenly so that buckets one
    week apart share the same within-week time point.
    """

    origin: datetime
    bucket_width: timedelta
    values: tuple[float, ...]
    missing: tuple[bool, ...]

    @property
    def buckets_per_week(self) -> int:
        return int(WEEK.total_seconds() // self.bucket_width.total_seconds())

    def bucket_start(self, i: int) -> datetime:
        return self.origin + i * self.bucket_width


def sessionize(events: Sequence[AccessEvent], session_gap: timedelta = DEFAULT_SESSION_GAP) -> list[Session]:
    """Partition one participant's time-sorted events into sessions.

    A new session starts whenever the gap since the previous event
    exceeds ``session_gap``.
    """
    if not events:
        return []
    uid = events[0].uid
    sessions: list[Session] = []
    start = prev = events[0].ts
    count = 1
    for e in events[1:]:
        if e.ts < prev:
            raise ValueError("events must be time-sorted")
        if e.ts - prev > session_gap:
            sessions.append(Session(uid=uid, start=start, end=prev, event_count=count))
            start = e.ts
            count = 0
        count += 1
        prev = e.ts
    sessions.append(Session(uid=uid, start=start, end=prev, event_count=count))
    return sessions


def is_night(local: datetime, start_hour: int = NIGHT_START_HOUR, end_hour: int = NIGHT_END_HOUR) -> bool:
    return local.hour >= start_hour or local.hour < end_hour


def schedule_features(
    events: Sequence[AccessEvent],
    tz: timezone = REFERENCE_TZ,
    uid: str | None = None,
) -> ScheduleFeatures:
    """Night/weekend work shares for one participant.

    Night is local [22:00, 06:00); weekend is local Saturday or Sunday.
    Fractions are count-weighted over all events.
    """
    if not events:
        return ScheduleFeatures(uid=uid or "", night_fraction=0.0, weekend_fraction=0.0,
                                active_days=0, events_total=0)
    night = weekend = 0
    days = set()
    for e in events:
        local = e.ts.astimezone(tz)
        if is_night(local):
            night += 1
        if local.weekday() >= 5:
            weekend += 1
        days.add(local.date())
    n = len(events)
    return ScheduleFeatures(
        uid=uid or events[0].uid,
        night_fraction=night / n,
        weekend_fraction=weekend / n,
        active_days=len(days),
        events_total=n,
    )


def load_field_table(path: str | Path) -> dict[int, str]:
    """PMID → research-field lookup from a CSV with columns pmid,field."""
    table: dict[int, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["pmid", "field"]:
            raise ValueError(f"field table header must be ['pmid', 'field'], got {header}")
        for row in reader:
            table[int(row[0])] = row[1]
    return table


def categorize_participant(pmids: Sequence[int], field_table: dict[int, str]) -> FieldDistribution:
    """Research-field distribution of a participant's article accesses.

    Shares sum to 1 over the matched PMIDs; coverage reports the matched
    share of all accesses.
    """
    if not pmids:
        raise EmptyInput("no PMIDs to categorize")
    counts: dict[str, int] = {}
    matched = 0
    for pmid in pmids:
        fld = field_table.get(pmid)
        if fld is not None:
            counts[fld] = counts.get(fld, 0) + 1
            matched += 1
    shares = {fld: c / matched for fld, c in sorted(counts.items())} if matched else {}
    return FieldDistribution(
        shares=shares,
        coverage=matched / len(pmids),
        matched=matched,
        total=len(pmids),
    )


def week_origin(ts: datetime, tz: timezone = timezone.utc) -> datetime:
    """Midnight of the Monday starting the week that contains ``ts``."""
    local = ts.astimezone(tz)
    monday = local.date() - timedelta(days=local.weekday())
    return datetime(monday.year, monday.month, monday.day, tzinfo=tz)


def aggregate(
    events: Iterable[AccessEvent],
    bucket_width: timedelta,
    downtime: Sequence[tuple[datetime, datetime]] = (),
    origin: datetime | None = None,
) -> TimeSeries:
    """Count events per bucket; buckets overlapping downtime are missing.

    The bucket grid is aligned to whole weeks: ``bucket_width`` must
    divide one week evenly and the origin snaps to a week boundary.
    """
    width_s = bucket_width.total_seconds()
    if width_s <= 0 or WEEK.total_seconds() % width_s != 0:
        raise MisalignedBucket(f"bucket width {bucket_width} does not divide one week evenly")
    events = list(events)
    stamps = [e.ts for e in events]
    bounds = list(stamps) + [w[0] for w in downtime] + [w[1] - timedelta(seconds=1) for w in downtime]
    if not bounds:
        return TimeSeries(
            origin=origin or datetime(1970, 1, 5, tzinfo=timezone.utc),
            bucket_width=bucket_width,
            values=(),
            missing=(),
        )
    if origin is None:
        origin = week_origin(min(bounds))
    elif week_origin(origin) != origin:
        raise MisalignedBucket("origin must sit on a week boundary (Monday 00:00 UTC)")
    last = max(bounds)
    n_buckets = int((last - origin).total_seconds() // width_s) + 1
    if min(bounds) < origin:
        raise MisalignedBucket("events precede the series origin")
    values = [0.0] * n_buckets
    for ts in stamps:
        values[int((ts - origin).total_seconds() // width_s)] += 1.0
    missing = [False] * n_buckets
    for start, end in downtime:
        for i in range(n_buckets):
            b_start = origin + i * bucket_width
            b_end = b_start + bucket_width
            if start < b_end and b_start < end:
                missing[i] = True
    return TimeSeries(origin=origin, bucket_width=bucket_width, values=tuple(values), missing=tuple(missing))


def impute_gaps(series: TimeSeries) -> TimeSeries:
    """Fill missing buckets with the mean of the same time point one week
    before and one week after.

    When only one of the two neighbors is known, that value is used
    alone; with neither known the bucket stays missing. Passes repeat
    (synchronous updates) until nothing changes, so applying the
    operation to its own output is a no-op. Non-missing buckets are
    never modified.
    """
    w = series.buckets_per_week
    values = list(series.values)
    missing = list(series.missing)
    n = len(values)
    changed = True
    while changed:
        changed = False
        snapshot_values = list(values)
        snapshot_missing = list(missing)

        def known(i: int) -> bool:
            return 0 <= i < n and not snapshot_missing[i]

        for i in range(n):
            if not snapshot_missing[i]:
                continue
            prev_ok, next_ok = known(i - w), known(i + w)
            if prev_ok and next_ok:
                values[i] = (snapshot_values[i - w] + snapshot_values[i + w]) / 2.0
            elif prev_ok:
                values[i] = snapshot_values[i - w]
            elif next_ok:
                values[i] = snapshot_values[i + w]
            else:
                continue
            missing[i] = False
            changed = True
    return replace(series, values=tuple(values), missing=tuple(missing))
