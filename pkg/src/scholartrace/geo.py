"""IP geolocation, anonymizer detection, and user-agent parsing.

Locations come from pluggable resolvers (an offline CSV fixture is the
default; live HTTP resolvers are opt-in and never constructed
implicitly). Anonymizer detection walks a participant's time-sorted
trace keeping a trusted anchor: an event whose implied travel speed from
the anchor exceeds ``v_max`` marks its IP as an anonymous network node
for that participant, and traffic through a flagged IP is reassigned to
the participant's nearest trusted location.
"""

from __future__ import annotations

import csv
import ipaddress
import json
import re
import urllib.request
from dataclasses import dataclass, field, replace
from datetime import datetime
from math import asin, cos, radians, sin, sqrt
from pathlib import Path
from typing import Iterable, Protocol

EARTH_RADIUS_KM = 6371.0

# Sea-level speed of sound, 343 m/s. Travel faster than this between two
# resolved locations is treated as evidence of an anonymizer exit node.
SPEED_OF_SOUND_KMH = 1234.8


@dataclass(frozen=True)
class GeoPoint:
    """Latitude/longitude pair; lon normalized to (-180, 180]."""

    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 540.0:
            raise ValueError(f"longitude out of range: {self.lon}")
        lon = self.lon % 360.0
        if lon > 180.0:
            lon -= 360.0
        if abs(self.lat) == 90.0:
            lon = 0.0  # poles are a single point; canonicalize
        object.__setattr__(self, "lon", lon)


@dataclass(frozen=True)
class CityLocation:
    country: str
    city: str
    point: GeoPoint

    def __post_init__(self):
        if not self.city:
            raise ValueError("resolved locations must carry a non-empty city")


@dataclass(frozen=True)
class AnonymityLabel:
    """An IP flagged as an anonymous network node for one participant."""

    ip: str
    scope: str
    flagged_at: datetime


@dataclass(frozen=True)
class UAInfo:
    browser_family: str
    browser_version: str
    os_family: str
    raw: str


@dataclass(frozen=True)
class TraceEvent:
    """One event of a participant's location trace.

    ``location`` is the event's own resolution result (None when the IP
    could not be resolved); ``flagged``/``real_location`` are filled by
    classify_anonymous and reassign_locations.
    """

    ts: datetime
    ip: str
    location: CityLocation | None = None
    flagged: bool = False
    real_location: CityLocation | None = None


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in kilometers on a 6371.0 km sphere."""
    phi1 = radians(a.lat)
    phi2 = radians(b.lat)
    dphi = radians(b.lat - a.lat)
    dlam = radians(b.lon - a.lon)
    h = sin(dphi / 2.0) ** 2 + cos(phi1) * cos(phi2) * sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * asin(min(1.0, sqrt(h)))


class IpResolver(Protocol):
    def resolve(self, ip: str) -> CityLocation | None: ...


class CsvFixtureResolver:
    """Offline resolver backed by a CSV with columns ip,country,city,lat,lon."""

    HEADER = ["ip", "country", "city", "lat", "lon"]

    def __init__(self, path: str | Path):
        self._table: dict[str, CityLocation] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != self.HEADER:
                raise ValueError(f"fixture header must be {self.HEADER}, got {header}")
            for row in reader:
                ip, country, city, lat, lon = row
                self._table[ip] = CityLocation(
                    country=country, city=city, point=GeoPoint(float(lat), float(lon))
                )

    def __len__(self) -> int:
        return len(self._table)

    def resolve(self, ip: str) -> CityLocation | None:
        return self._table.get(ip)


class HttpApiResolver:
    """Live resolver hitting a JSON HTTP endpoint. Never used by default.

    ``endpoint`` is a format string with an ``{ip}`` placeholder; the
    response must be a JSON object with country/city/lat/lon keys.
    """

    def __init__(self, endpoint: str, api_key: str = "", timeout: float = 5.0):
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout = timeout

    def resolve(self, ip: str) -> CityLocation | None:
        url = self.endpoint.format(ip=ip)
        req = urllib.request.Request(url)
        if self.api_key:
            req.add_header("Authorization", self.api_key)
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                doc = json.loads(resp.read().decode("utf-8"))
            return CityLocation(
                country=str(doc["country"]),
                city=str(doc["city"]),
                point=GeoPoint(float(doc["lat"]), float(doc["lon"])),
            )
        except Exception:
            return None


class CachingResolver:
    """Caches resolution results by exact IP, including misses."""

    def __init__(self, inner: IpResolver):
        self.inner = inner
        self._cache: dict[str, CityLocation | None] = {}

    def resolve(self, ip: str) -> CityLocation | None:
        if ip not in self._cache:
            self._cache[ip] = self.inner.resolve(ip)
        return self._cache[ip]


def is_valid_ip(ip: str) -> bool:
    try:
        ipaddress.ip_address(ip)
        return True
    except ValueError:
        return False


def resolve_ip(ip: str, resolver: IpResolver) -> CityLocation | None:
    """Resolve a syntactically valid IP to a city-level location.

    Returns None when the resolver has no answer; downstream treats such
    events as keeping the participant's last known location.
    """
    if not is_valid_ip(ip):
        raise ValueError(f"not a valid IP address: {ip!r}")
    return resolver.resolve(ip)


def build_trace(events: Iterable, resolver: IpResolver) -> list[TraceEvent]:
    """Resolve a time-sorted event sequence into a location trace.

    Accepts anything with ``ts`` and ``ip`` attributes.
    """
    cached = resolver if isinstance(resolver, CachingResolver) else CachingResolver(resolver)
    return [TraceEvent(ts=e.ts, ip=e.ip, location=cached.resolve(e.ip)) for e in events]


def classify_anonymous(
    trace: list[TraceEvent], uid: str, v_max: float = SPEED_OF_SOUND_KMH
) -> tuple[set[AnonymityLabel], list[TraceEvent]]:
    """Flag anonymizer exit IPs in one participant's trace.

    Single forward pass: the first resolvable event seeds the trusted
    anchor. An event whose implied speed from the anchor exceeds
    ``v_max`` (or that moved with zero elapsed time) gets its IP flagged
    for this participant and the anchor stays put; otherwise the event
    becomes the new anchor. Later events through a flagged IP are flagged
    without re-testing. Events without a resolved location are skipped:
    they can neither be tested nor serve as anchors.
    """
    labels: dict[str, AnonymityLabel] = {}
    annotated: list[TraceEvent] = []
    anchor: TraceEvent | None = None
    prev_ts: datetime | None = None
    for ev in trace:
        if prev_ts is not None and ev.ts < prev_ts:
            raise ValueError("trace must be sorted ascending by ts")
        prev_ts = ev.ts
        if ev.ip in labels:
            annotated.append(replace(ev, flagged=True))
            continue
        if ev.location is None:
            annotated.append(replace(ev, flagged=False))
            continue
        if anchor is None:
            anchor = ev
            annotated.append(replace(ev, flagged=False))
            continue
        dist = haversine_km(anchor.location.point, ev.location.point)
        dt_h = (ev.ts - anchor.ts).total_seconds() / 3600.0
        if (dt_h == 0.0 and dist > 0.0) or (dt_h > 0.0 and dist / dt_h > v_max):
            labels[ev.ip] = AnonymityLabel(ip=ev.ip, scope=uid, flagged_at=ev.ts)
            annotated.append(replace(ev, flagged=True))
        else:
            anchor = ev
            annotated.append(replace(ev, flagged=False))
    return set(labels.values()), annotated


def reassign_locations(trace: list[TraceEvent]) -> list[TraceEvent]:
    """Fill ``real_location`` after classify_anonymous has run.

    Flagged events take the location of the nearest-in-time unflagged
    resolved event (ties broken toward the earlier one). Unflagged
    resolved events keep their own location; unflagged unresolved events
    carry the last known trusted location forward. With no trusted event
    at all, everything stays unresolved.
    """
    donors = [(i, ev) for i, ev in enumerate(trace) if not ev.flagged and ev.location is not None]
    if not donors:
        return [replace(ev, real_location=None) for ev in trace]

    out: list[TraceEvent] = []
    d = 0
    for i, ev in enumerate(trace):
        if not ev.flagged and ev.location is not None:
            out.append(replace(ev, real_location=ev.location))
            continue
        # advance the donor cursor to the last donor at or before i
        while d + 1 < len(donors) and donors[d + 1][0] <= i:
            d += 1
        before = donors[d][1] if donors[d][0] <= i else None
        after_idx = d + 1 if donors[d][0] <= i else d
        after = donors[after_idx][1] if after_idx < len(donors) else None
        if ev.flagged:
            if before is None:
                chosen = after
            elif after is None:
                chosen = before
            else:
                gap_before = (ev.ts - before.ts).total_seconds()
                gap_after = (after.ts - ev.ts).total_seconds()
                chosen = before if gap_before <= gap_after else after
        else:
            # unresolved, unflagged: keep last known location
            chosen = before
        out.append(replace(ev, real_location=chosen.location if chosen else None))
    return out


_UA_VERSION_PATTERNS = [
    ("Edge", re.compile(r"Edg(?:e|A|iOS)?/([\d.]+)")),
    ("Chrome", re.compile(r"(?:Chrome|CriOS)/([\d.]+)")),
    ("Firefox", re.compile(r"(?:Firefox|FxiOS)/([\d.]+)")),
    ("Safari", re.compile(r"Version/([\d.]+)")),
]


def parse_user_agent(raw: str | bytes) -> UAInfo:
    """Best-effort token parse of a user-agent header. Never raises.

    Recognizes the Chrome, Firefox, Safari, and Edge families and the
    Windows, macOS, Linux, Android, and iOS platforms; everything else
    is reported as "other". The raw string is always preserved.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8", "replace")
    s = raw

    family = "other"
    if "Edg" in s:
        family = "Edge"
    elif "OPR/" in s or "Opera" in s:
        family = "other"
    elif "Chrome/" in s or "CriOS/" in s:
        if "Chromium" not in s:
            family = "Chrome"
    elif "Firefox/" in s or "FxiOS/" in s:
        family = "Firefox"
    elif "Safari/" in s and "Mozilla/" in s:
        family = "Safari"

    version = ""
    for fam, pattern in _UA_VERSION_PATTERNS:
        if fam == family:
            m = pattern.search(s)
            if m:
                version = m.group(1)
            break

    os_family = "other"
    if "Windows" in s:
        os_family = "Windows"
    elif "Android" in s:
        os_family = "Android"
    elif "iPhone" in s or "iPad" in s or "iPod" in s or "iOS" in s:
        os_family = "iOS"
    elif "Mac OS X" in s or "Macintosh" in s:
        os_family = "macOS"
    elif "Linux" in s or "X11" in s:
        os_family = "Linux"

    return UAInfo(browser_family=family, browser_version=version, os_family=os_family, raw=raw)
