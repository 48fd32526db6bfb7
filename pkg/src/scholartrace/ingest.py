"""Participant registration, event/survey intake, and the append-only store.

Participants are identified solely by a 32-hex-digit UID derived with
MD5 from client entropy, the allocation timestamp, and a per-deployment
salt (env var SCHOLARTRACE_SALT). With salt disabled and no timestamp
the digest degenerates to plain MD5 of the entropy, which keeps the
standard test vectors checkable.

The store is append-only: records are serialized as canonical JSON
lines (UTF-8, LF) and never mutated. Replaying a persisted log
reconstructs a byte-identical store.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable

from .geo import is_valid_ip

UID_RE = re.compile(r"^[0-9a-f]{32}$")

MAX_KEYWORD_LEN = 512
MAX_UA_LEN = 1024
MAX_PMID = 999_999_999
CLOCK_SKEW_S = 300
ELIGIBLE_MIN_DAYS = 7

# Distinct active days are counted in this reference zone by default
# (the study population works at UTC+8).
REFERENCE_TZ = timezone(timedelta(hours=8))

SALT_ENV_VAR = "SCHOLARTRACE_SALT"

WIRE_EVENT_KEYS = ("uid", "ts", "keyword", "pmid", "ip", "ua")
WIRE_SURVEY_KEYS = ("uid", "wave", "basic", "pss", "jss", "rc", "ra", "fs")


class IngestError(Exception):
    pass


class StoreUnavailable(IngestError):
    pass


class CollisionRetryExhausted(IngestError):
    pass


class UnknownUid(IngestError):
    pass


class MalformedEvent(IngestError):
    def __init__(self, field: str, detail: str = ""):
        self.field = field
        super().__init__(f"malformed event field {field!r}" + (f": {detail}" if detail else ""))


class MalformedSurvey(IngestError):
    def __init__(self, field: str, detail: str = ""):
        self.field = field
        super().__init__(f"malformed survey field {field!r}" + (f": {detail}" if detail else ""))


class DowntimeRejected(IngestError):
    pass


class OverlapsExisting(IngestError):
    pass


@dataclass(frozen=True)
class Ack:
    seq: int


@dataclass(frozen=True, slots=True)
class AccessEvent:
    """One literature-access record as received on the wire."""

    uid: str
    ts: datetime
    keyword: str | None
    pmid: int | None
    ip: str
    ua: str


@dataclass(frozen=True, slots=True)
class StoredEvent:
    seq: int
    event: AccessEvent
    recv: datetime


@dataclass(frozen=True, slots=True)
class StoredSurvey:
    seq: int
    uid: str
    ts: datetime
    wave_seq: int
    payload: dict


def format_ts(dt: datetime) -> str:
    """Seconds-precision ISO-8601 UTC, e.g. 2018-07-04T12:00:00Z."""
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_ts(s: str) -> datetime:
    try:
        dt = datetime.fromisoformat(s.replace("Z", "+00:00"))
    except (ValueError, AttributeError, TypeError) as exc:
        raise ValueError(f"bad timestamp {s!r}") from exc
    if dt.tzinfo is None:
        raise ValueError(f"timestamp must carry a UTC offset: {s!r}")
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def canonical_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n"


def uid_digest(
    client_entropy: bytes,
    ts: datetime | None = None,
    salt: bytes | None = None,
    attempt: int = 0,
) -> str:
    """Lowercase-hex MD5 of entropy ‖ timestamp ‖ salt (‖ retry counter).

    With ``ts=None`` and ``salt=None`` this is the raw digest of the
    entropy alone (test mode).
    """
    if len(client_entropy) < 1 and (ts is not None or salt):
        raise ValueError("client entropy must be at least one byte")
    material = bytes(client_entropy)
    if ts is not None:
        material += format_ts(ts).encode("ascii")
    if salt:
        material += salt
    if attempt:
        material += b"|retry:%d" % attempt
    return hashlib.md5(material).hexdigest()


def event_from_wire(obj: dict, fallback_ip: str | None = None, fallback_ua: str | None = None) -> AccessEvent:
    """Build an AccessEvent from a wire JSON object.

    ``ip`` and ``ua`` may be omitted on the wire; they are attached
    server-side from the transport (``fallback_ip``/``fallback_ua``).
    """
    if not isinstance(obj, dict):
        raise MalformedEvent("body", "event must be a JSON object")
    unknown = set(obj) - set(WIRE_EVENT_KEYS)
    if unknown:
        raise MalformedEvent(sorted(unknown)[0], "unknown key")
    if "uid" not in obj:
        raise MalformedEvent("uid", "missing")
    if "ts" not in obj:
        raise MalformedEvent("ts", "missing")
    try:
        ts = parse_ts(obj["ts"])
    except ValueError as exc:
        raise MalformedEvent("ts", str(exc)) from exc
    ip = obj.get("ip", fallback_ip)
    ua = obj.get("ua", fallback_ua)
    if ip is None:
        raise MalformedEvent("ip", "missing and no transport fallback")
    if ua is None:
        raise MalformedEvent("ua", "missing and no transport fallback")
    return AccessEvent(
        uid=obj["uid"],
        ts=ts,
        keyword=obj.get("keyword"),
        pmid=obj.get("pmid"),
        ip=ip,
        ua=ua,
    )


def event_to_wire(e: AccessEvent) -> dict:
    return {
        "uid": e.uid,
        "ts": format_ts(e.ts),
        "keyword": e.keyword,
        "pmid": e.pmid,
        "ip": e.ip,
        "ua": e.ua,
    }


def _utc_now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


class EventStore:
    """Append-only store for access events, surveys, and downtime windows.

    Appends are serialized (sequence numbers give a total order); reads
    used by analysis operate on the immutable record lists.
    """

    def __init__(
        self,
        path: str | Path | None = None,
        salt: bytes | None = None,
        now: Callable[[], datetime] | None = None,
        reference_tz: timezone = REFERENCE_TZ,
    ):
        self.salt = salt if salt is not None else os.environ.get(SALT_ENV_VAR, "").encode() or None
        self.reference_tz = reference_tz
        self._now = now or _utc_now
        self._uids: set[str] = set()
        self._uid_log: list[tuple[str, datetime]] = []
        self._events: list[StoredEvent] = []
        self._surveys: list[StoredSurvey] = []
        self._downtime: list[tuple[datetime, datetime]] = []
        self._order: list[tuple[str, int]] = []
        self._seq = 0
        self._wave_counts: dict[str, int] = {}
        self._days: dict[str, set[date]] = {}
        self._ip_ok: dict[str, bool] = {}
        self._path = Path(path) if path is not None else None
        self._fh = None
        if self._path is not None:
            try:
                self._fh = open(self._path, "a", encoding="utf-8", newline="\n")
            except OSError as exc:
                raise StoreUnavailable(f"cannot open store at {self._path}: {exc}") from exc

    # -- record plumbing ---------------------------------------------------

    def _append(self, kind: str, record: dict, index: int) -> None:
        self._order.append((kind, index))
        if self._fh is not None:
            try:
                self._fh.write(canonical_line(record))
            except OSError as exc:
                raise StoreUnavailable(f"write failed: {exc}") from exc

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def flush(self) -> None:
        if self._fh is not None:
            self._fh.flush()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def events(self) -> list[StoredEvent]:
        return self._events

    @property
    def surveys(self) -> list[StoredSurvey]:
        return self._surveys

    @property
    def downtime_windows(self) -> list[tuple[datetime, datetime]]:
        return list(self._downtime)

    @property
    def registered_uids(self) -> set[str]:
        return set(self._uids)

    def __len__(self) -> int:
        return len(self._events)

    # -- operations ----------------------------------------------------------

    def allocate_uid(
        self,
        client_entropy: bytes,
        ts: datetime | None = None,
        presented_uid: str | None = None,
    ) -> str:
        """Allocate (or re-acknowledge) a participant UID.

        A client presenting its already-registered UID gets it back
        unchanged. Fresh allocations digest entropy ‖ ts ‖ salt and retry
        up to 3 times on collision.
        """
        if presented_uid is not None:
            if not UID_RE.match(presented_uid):
                raise MalformedEvent("uid", "presented UID is not 32 lowercase hex digits")
            if presented_uid in self._uids:
                return presented_uid
            return self.register_uid(presented_uid, ts)
        if len(client_entropy) < 1:
            raise ValueError("client entropy must be at least one byte")
        for attempt in range(3):
            uid = uid_digest(client_entropy, ts, self.salt, attempt)
            if uid not in self._uids:
                return self.register_uid(uid, ts)
        raise CollisionRetryExhausted("3 UID regeneration attempts collided")

    def register_uid(self, uid: str, ts: datetime | None = None) -> str:
        """Directly register a known-good UID (log replay, presented cookies)."""
        if not UID_RE.match(uid):
            raise MalformedEvent("uid", "not 32 lowercase hex digits")
        if uid in self._uids:
            return uid
        when = ts if ts is not None else self._now()
        self._uids.add(uid)
        self._uid_log.append((uid, when))
        self._append("uid", {"type": "uid", "uid": uid, "ts": format_ts(when)}, len(self._uid_log) - 1)
        return uid

    def _check_ip(self, ip) -> bool:
        ok = self._ip_ok.get(ip)
        if ok is None:
            ok = isinstance(ip, str) and is_valid_ip(ip)
            if len(self._ip_ok) < 65536:
                self._ip_ok[ip] = ok
        return ok

    def in_downtime(self, ts: datetime) -> bool:
        for start, end in self._downtime:
            if start <= ts < end:
                return True
        return False

    def submit_event(self, e: AccessEvent, recv: datetime | None = None) -> Ack:
        if not isinstance(e.uid, str) or not UID_RE.match(e.uid):
            raise MalformedEvent("uid", "not 32 lowercase hex digits")
        if e.uid not in self._uids:
            raise UnknownUid(e.uid)
        if e.keyword is None and e.pmid is None:
            raise MalformedEvent("keyword", "at least one of keyword/pmid required")
        if e.keyword is not None and (not isinstance(e.keyword, str) or len(e.keyword) > MAX_KEYWORD_LEN):
            raise MalformedEvent("keyword", "must be a string of at most 512 chars")
        if e.pmid is not None and (
            not isinstance(e.pmid, int) or isinstance(e.pmid, bool) or not 0 < e.pmid <= MAX_PMID
        ):
            raise MalformedEvent("pmid", "must be a positive integer of at most 9 digits")
        if not self._check_ip(e.ip):
            raise MalformedEvent("ip", "not a valid IPv4/IPv6 address")
        if not isinstance(e.ua, str) or len(e.ua) > MAX_UA_LEN:
            raise MalformedEvent("ua", "must be a string of at most 1024 chars")
        if e.ts.tzinfo is None:
            raise MalformedEvent("ts", "must be timezone-aware UTC")
        now = recv if recv is not None else self._now()
        if (e.ts - now).total_seconds() > CLOCK_SKEW_S:
            raise MalformedEvent("ts", "timestamp beyond the 300 s skew allowance")
        if self.in_downtime(e.ts):
            raise DowntimeRejected(f"event at {format_ts(e.ts)} falls inside a maintenance window")
        self._seq += 1
        stored = StoredEvent(seq=self._seq, event=e, recv=now)
        self._events.append(stored)
        self._days.setdefault(e.uid, set()).add(e.ts.astimezone(self.reference_tz).date())
        rec = event_to_wire(e)
        rec["type"] = "event"
        rec["seq"] = self._seq
        rec["recv"] = format_ts(now)
        self._append("event", rec, len(self._events) - 1)
        return Ack(self._seq)

    def submit_survey(self, payload: dict, ts: datetime | None = None) -> Ack:
        """Store a survey payload verbatim; scoring happens downstream."""
        if not isinstance(payload, dict):
            raise MalformedSurvey("body", "survey must be a JSON object")
        for key in WIRE_SURVEY_KEYS:
            if key not in payload:
                raise MalformedSurvey(key, "missing")
        unknown = set(payload) - set(WIRE_SURVEY_KEYS)
        if unknown:
            raise MalformedSurvey(sorted(unknown)[0], "unknown key")
        uid = payload["uid"]
        if not isinstance(uid, str) or not UID_RE.match(uid):
            raise MalformedSurvey("uid", "not 32 lowercase hex digits")
        if uid not in self._uids:
            raise UnknownUid(uid)
        if not isinstance(payload["wave"], int) or isinstance(payload["wave"], bool) or payload["wave"] < 0:
            raise MalformedSurvey("wave", "must be a non-negative integer")
        when = ts if ts is not None else self._now()
        if self.in_downtime(when):
            raise DowntimeRejected(f"survey at {format_ts(when)} falls inside a maintenance window")
        self._seq += 1
        wave_seq = self._wave_counts.get(uid, 0)
        self._wave_counts[uid] = wave_seq + 1
        stored = StoredSurvey(seq=self._seq, uid=uid, ts=when, wave_seq=wave_seq, payload=payload)
        self._surveys.append(stored)
        rec = {
            "type": "survey",
            "seq": self._seq,
            "uid": uid,
            "ts": format_ts(when),
            "wave_seq": wave_seq,
            "payload": payload,
        }
        self._append("survey", rec, len(self._surveys) - 1)
        return Ack(self._seq)

    def register_downtime(self, start: datetime, end: datetime) -> Ack:
        """Register a maintenance window; submissions inside it are rejected."""
        if not start < end:
            raise ValueError("downtime window requires start < end")
        for s, e in self._downtime:
            if start < e and s < end:
                raise OverlapsExisting(f"window overlaps [{format_ts(s)}, {format_ts(e)})")
        for stored in self._events:
            if start <= stored.event.ts < end:
                raise OverlapsExisting("window would cover already-persisted events")
        for survey in self._surveys:
            if start <= survey.ts < end:
                raise OverlapsExisting("window would cover already-persisted surveys")
        self._downtime.append((start, end))
        self._append(
            "downtime",
            {"type": "downtime", "start": format_ts(start), "end": format_ts(end)},
            len(self._downtime) - 1,
        )
        return Ack(self._seq)

    # -- views ---------------------------------------------------------------

    def events_by_uid(self) -> dict[str, list[AccessEvent]]:
        """Events grouped per participant, each list time-sorted."""
        grouped: dict[str, list[AccessEvent]] = {}
        for stored in self._events:
            grouped.setdefault(stored.event.uid, []).append(stored.event)
        for evs in grouped.values():
            evs.sort(key=lambda e: e.ts)
        return grouped

    def active_days(self, tz: timezone | None = None) -> dict[str, int]:
        if tz is None or tz == self.reference_tz:
            return {uid: len(days) for uid, days in self._days.items()}
        counts: dict[str, set[date]] = {}
        for stored in self._events:
            counts.setdefault(stored.event.uid, set()).add(stored.event.ts.astimezone(tz).date())
        return {uid: len(days) for uid, days in counts.items()}

    # -- persistence -----------------------------------------------------------

    def _record_for(self, kind: str, index: int) -> dict:
        if kind == "uid":
            uid, ts = self._uid_log[index]
            return {"type": "uid", "uid": uid, "ts": format_ts(ts)}
        if kind == "event":
            st = self._events[index]
            rec = event_to_wire(st.event)
            rec["type"] = "event"
            rec["seq"] = st.seq
            rec["recv"] = format_ts(st.recv)
            return rec
        if kind == "survey":
            st = self._surveys[index]
            return {
                "type": "survey",
                "seq": st.seq,
                "uid": st.uid,
                "ts": format_ts(st.ts),
                "wave_seq": st.wave_seq,
                "payload": st.payload,
            }
        start, end = self._downtime[index]
        return {"type": "downtime", "start": format_ts(start), "end": format_ts(end)}

    def save(self, path: str | Path) -> None:
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                for kind, index in self._order:
                    fh.write(canonical_line(self._record_for(kind, index)))
        except OSError as exc:
            raise StoreUnavailable(f"save failed: {exc}") from exc

    @classmethod
    def replay(cls, path: str | Path, **kwargs) -> "EventStore":
        """Reconstruct a store from its persisted log.

        Records were validated when first appended, so the loader trusts
        them; re-serializing the loaded store yields identical bytes.
        """
        store = cls(**kwargs)
        try:
            fh = open(path, encoding="utf-8")
        except OSError as exc:
            raise StoreUnavailable(f"cannot read store log {path}: {exc}") from exc
        with fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                kind = rec.get("type")
                if kind == "uid":
                    store._uids.add(rec["uid"])
                    store._uid_log.append((rec["uid"], parse_ts(rec["ts"])))
                    store._order.append(("uid", len(store._uid_log) - 1))
                elif kind == "event":
                    ev = AccessEvent(
                        uid=rec["uid"],
                        ts=parse_ts(rec["ts"]),
                        keyword=rec["keyword"],
                        pmid=rec["pmid"],
                        ip=rec["ip"],
                        ua=rec["ua"],
                    )
                    store._events.append(StoredEvent(seq=rec["seq"], event=ev, recv=parse_ts(rec["recv"])))
                    store._order.append(("event", len(store._events) - 1))
                    store._seq = max(store._seq, rec["seq"])
                    store._days.setdefault(ev.uid, set()).add(
                        ev.ts.astimezone(store.reference_tz).date()
                    )
                elif kind == "survey":
                    st = StoredSurvey(
                        seq=rec["seq"],
                        uid=rec["uid"],
                        ts=parse_ts(rec["ts"]),
                        wave_seq=rec["wave_seq"],
                        payload=rec["payload"],
                    )
                    store._surveys.append(st)
                    store._order.append(("survey", len(store._surveys) - 1))
                    store._seq = max(store._seq, rec["seq"])
                    store._wave_counts[st.uid] = max(store._wave_counts.get(st.uid, 0), st.wave_seq + 1)
                elif kind == "downtime":
                    store._downtime.append((parse_ts(rec["start"]), parse_ts(rec["end"])))
                    store._order.append(("downtime", len(store._downtime) - 1))
                else:
                    raise ValueError(f"unknown record type {kind!r} in {path}")
        return store


def eligible_participants(store: EventStore, tz: timezone | None = None) -> set[str]:
    """UIDs with at least 7 distinct active calendar days.

    Day boundaries are taken in ``tz`` (the store's reference zone by
    default, UTC+8). Participants who never obtained a UID (cookies off)
    never appear in the store at all. Exactly 7 distinct days is
    eligible: the exclusion is "less than 7".
    """
    return {uid for uid, n in store.active_days(tz).items() if n >= ELIGIBLE_MIN_DAYS}


def iter_ndjson(lines: Iterable[str]):
    for line in lines:
        line = line.strip()
        if line:
            yield json.loads(line)
