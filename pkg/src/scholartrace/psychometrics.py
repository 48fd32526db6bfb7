"""Questionnaire validation and scoring.

The survey has five sections: basic/health information, a 10-item
perceived-stress scale (items 0-4, four reverse-scored), a 15-item job
satisfaction scale (items 1-5), the role conflict (8 items) and role
ambiguity (6 items) scales (items 1-5), and a 4-item family support
subscale (items 1-7).

Quality control is delete-on-missing: a wave with any absent item or
obviously wrong answer is rejected outright, never imputed (imputation
applies only to event time series). Rejection names the first offending
field in section order.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

import numpy as np

PSS_ITEMS, PSS_MIN, PSS_MAX = 10, 0, 4
JSS_ITEMS, JSS_MIN, JSS_MAX = 15, 1, 5
RC_ITEMS, RA_ITEMS, RIZZO_MIN, RIZZO_MAX = 8, 6, 1, 5
FS_ITEMS, FS_MIN, FS_MAX = 4, 1, 7

# Standard PSS-10 reverse-scored positions (1-indexed). The deployment
# can override.
DEFAULT_PSS_REVERSE = frozenset({4, 5, 7, 8})

AGE_RANGE = (18, 100)
BMI_RANGE = (10.0, 60.0)
SBP_RANGE = (70, 250)
EDUCATION_LEVELS = ("secondary", "bachelor", "master", "doctorate", "other")
SEXES = ("female", "male")

SCORED_CSV_COLUMNS = (
    "uid",
    "wave",
    "pss_total",
    "jss_total",
    "role_conflict_total",
    "role_ambiguity_total",
    "family_support_total",
    "family_support_mean",
)


class WaveRejected(ValueError):
    """Survey record deleted: missing item or out-of-range answer."""

    MISSING = "MissingItem"
    OUT_OF_RANGE = "OutOfRange"

    def __init__(self, reason: str, field: str):
        self.reason = reason
        self.field = field
        super().__init__(f"{reason}: {field}")


class DegenerateVariance(ValueError):
    """Total-score variance is zero; alpha is undefined."""


@dataclass(frozen=True)
class BasicInfo:
    age: int
    bmi: float
    education: str
    sbp: int
    on_antihypertensives: bool
    smoker: bool
    diabetic: bool
    sex: str


@dataclass(frozen=True)
class SurveyWave:
    uid: str
    wave_index: int
    submitted: datetime | None
    basic: BasicInfo
    pss: tuple[int, ...]
    jss: tuple[int, ...]
    role_conflict: tuple[int, ...]
    role_ambiguity: tuple[int, ...]
    family_support: tuple[int, ...]


@dataclass(frozen=True)
class ScoredWave:
    uid: str
    wave_index: int
    pss_total: int
    jss_total: int
    role_conflict_total: int
    role_ambiguity_total: int
    family_support_total: int
    family_support_mean: float


def _require(payload: dict, key: str):
    if key not in payload or payload[key] is None:
        raise WaveRejected(WaveRejected.MISSING, key)
    return payload[key]


def _check_number(name: str, value, lo, hi, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise WaveRejected(WaveRejected.OUT_OF_RANGE, name)
    if integer and not isinstance(value, int):
        raise WaveRejected(WaveRejected.OUT_OF_RANGE, name)
    if not lo <= value <= hi:
        raise WaveRejected(WaveRejected.OUT_OF_RANGE, name)
    return value


def _check_items(name: str, raw, count: int, lo: int, hi: int) -> tuple[int, ...]:
    if not isinstance(raw, (list, tuple)):
        raise WaveRejected(WaveRejected.MISSING, name)
    if len(raw) != count:
        raise WaveRejected(WaveRejected.MISSING, f"{name}[{min(len(raw), count)}]")
    items = []
    for i, v in enumerate(raw):
        if v is None:
            raise WaveRejected(WaveRejected.MISSING, f"{name}[{i}]")
        if isinstance(v, bool) or not isinstance(v, int) or not lo <= v <= hi:
            raise WaveRejected(WaveRejected.OUT_OF_RANGE, f"{name}[{i}]")
        items.append(v)
    return tuple(items)


def validate_basic(raw: dict) -> BasicInfo:
    if not isinstance(raw, dict):
        raise WaveRejected(WaveRejected.MISSING, "basic")
    age = _check_number("basic.age", _require(raw, "age"), *AGE_RANGE, integer=True)
    bmi = _check_number("basic.bmi", _require(raw, "bmi"), *BMI_RANGE)
    education = _require(raw, "education")
    if education not in EDUCATION_LEVELS:
        raise WaveRejected(WaveRejected.OUT_OF_RANGE, "basic.education")
    sbp = _check_number("basic.sbp", _require(raw, "sbp"), *SBP_RANGE, integer=True)
    flags = {}
    for key in ("on_antihypertensives", "smoker", "diabetic"):
        value = _require(raw, key)
        if not isinstance(value, bool):
            raise WaveRejected(WaveRejected.OUT_OF_RANGE, f"basic.{key}")
        flags[key] = value
    sex = _require(raw, "sex")
    if sex not in SEXES:
        raise WaveRejected(WaveRejected.OUT_OF_RANGE, "basic.sex")
    return BasicInfo(age=age, bmi=float(bmi), education=education, sbp=sbp, sex=sex, **flags)


def validate_wave(payload: dict, submitted: datetime | None = None) -> SurveyWave:
    """Validate a raw survey payload into a SurveyWave.

    Raises WaveRejected naming the first absent or out-of-range field;
    rejected records are deleted, never imputed.
    """
    if not isinstance(payload, dict):
        raise WaveRejected(WaveRejected.MISSING, "payload")
    uid = _require(payload, "uid")
    wave = _require(payload, "wave")
    if isinstance(wave, bool) or not isinstance(wave, int) or wave < 0:
        raise WaveRejected(WaveRejected.OUT_OF_RANGE, "wave")
    basic = validate_basic(_require(payload, "basic"))
    pss = _check_items("pss", _require(payload, "pss"), PSS_ITEMS, PSS_MIN, PSS_MAX)
    jss = _check_items("jss", _require(payload, "jss"), JSS_ITEMS, JSS_MIN, JSS_MAX)
    rc = _check_items("rc", _require(payload, "rc"), RC_ITEMS, RIZZO_MIN, RIZZO_MAX)
    ra = _check_items("ra", _require(payload, "ra"), RA_ITEMS, RIZZO_MIN, RIZZO_MAX)
    fs = _check_items("fs", _require(payload, "fs"), FS_ITEMS, FS_MIN, FS_MAX)
    return SurveyWave(
        uid=uid,
        wave_index=wave,
        submitted=submitted,
        basic=basic,
        pss=pss,
        jss=jss,
        role_conflict=rc,
        role_ambiguity=ra,
        family_support=fs,
    )


def wave_to_wire(wave: SurveyWave) -> dict:
    """Serialize back to the wire payload shape (round-trip stable)."""
    b = wave.basic
    return {
        "uid": wave.uid,
        "wave": wave.wave_index,
        "basic": {
            "age": b.age,
            "bmi": b.bmi,
            "education": b.education,
            "sbp": b.sbp,
            "on_antihypertensives": b.on_antihypertensives,
            "smoker": b.smoker,
            "diabetic": b.diabetic,
            "sex": b.sex,
        },
        "pss": list(wave.pss),
        "jss": list(wave.jss),
        "rc": list(wave.role_conflict),
        "ra": list(wave.role_ambiguity),
        "fs": list(wave.family_support),
    }


def score_pss(items, reverse_items: frozenset[int] = DEFAULT_PSS_REVERSE) -> int:
    """Perceived-stress total 0..40; reverse-scored items map x -> 4 - x.

    ``reverse_items`` holds 1-indexed positions.
    """
    if len(items) != PSS_ITEMS:
        raise ValueError(f"PSS has {PSS_ITEMS} items, got {len(items)}")
    total = 0
    for i, x in enumerate(items, start=1):
        if not PSS_MIN <= x <= PSS_MAX:
            raise ValueError(f"PSS item {i} out of range: {x}")
        total += (PSS_MAX - x) if i in reverse_items else x
    return total


def score_jss(items) -> int:
    """Job-satisfaction total 15..75 (plain sum)."""
    if len(items) != JSS_ITEMS:
        raise ValueError(f"JSS has {JSS_ITEMS} items, got {len(items)}")
    for i, x in enumerate(items):
        if not JSS_MIN <= x <= JSS_MAX:
            raise ValueError(f"JSS item {i + 1} out of range: {x}")
    return int(sum(items))


def score_rizzo(conflict, ambiguity, reverse_ambiguity: bool = False) -> tuple[int, int]:
    """Role-conflict (8..40) and role-ambiguity (6..30) totals, reported
    separately; no cross-subscale total exists.

    The original instrument words ambiguity items positively;
    ``reverse_ambiguity`` applies x -> 6 - x to them when the deployment
    wants the reversed convention.
    """
    if len(conflict) != RC_ITEMS:
        raise ValueError(f"role conflict has {RC_ITEMS} items, got {len(conflict)}")
    if len(ambiguity) != RA_ITEMS:
        raise ValueError(f"role ambiguity has {RA_ITEMS} items, got {len(ambiguity)}")
    for name, seq in (("conflict", conflict), ("ambiguity", ambiguity)):
        for i, x in enumerate(seq):
            if not RIZZO_MIN <= x <= RIZZO_MAX:
                raise ValueError(f"role {name} item {i + 1} out of range: {x}")
    amb = [(RIZZO_MIN + RIZZO_MAX - x) for x in ambiguity] if reverse_ambiguity else list(ambiguity)
    return int(sum(conflict)), int(sum(amb))


def score_family_support(items) -> tuple[int, float]:
    """Family-support sum (4..28) and mean (1..7)."""
    if len(items) != FS_ITEMS:
        raise ValueError(f"family support has {FS_ITEMS} items, got {len(items)}")
    for i, x in enumerate(items):
        if not FS_MIN <= x <= FS_MAX:
            raise ValueError(f"family support item {i + 1} out of range: {x}")
    total = int(sum(items))
    return total, total / FS_ITEMS


def score_wave(
    wave: SurveyWave,
    pss_reverse: frozenset[int] = DEFAULT_PSS_REVERSE,
    reverse_ambiguity: bool = False,
) -> ScoredWave:
    rc_total, ra_total = score_rizzo(wave.role_conflict, wave.role_ambiguity, reverse_ambiguity)
    fs_total, fs_mean = score_family_support(wave.family_support)
    return ScoredWave(
        uid=wave.uid,
        wave_index=wave.wave_index,
        pss_total=score_pss(wave.pss, pss_reverse),
        jss_total=score_jss(wave.jss),
        role_conflict_total=rc_total,
        role_ambiguity_total=ra_total,
        family_support_total=fs_total,
        family_support_mean=fs_mean,
    )


def cronbach_alpha(item_matrix) -> float:
    """Internal-consistency alpha: k/(k-1) * (1 - sum item var / total var).

    Variances use the n-1 denominator. Raises DegenerateVariance when
    the total score does not vary at all.
    """
    m = np.asarray(item_matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] < 2 or m.shape[1] < 2:
        raise ValueError(f"need an n x k matrix with n, k >= 2, got shape {m.shape}")
    k = m.shape[1]
    item_var = m.var(axis=0, ddof=1).sum()
    total_var = m.sum(axis=1).var(ddof=1)
    if total_var == 0.0:
        raise DegenerateVariance("total-score variance is zero")
    return float(k / (k - 1) * (1.0 - item_var / total_var))


def scored_to_csv(rows) -> str:
    """Render scored waves as CSV in the documented fixed column order."""
    lines = [",".join(SCORED_CSV_COLUMNS)]
    for r in rows:
        lines.append(
            f"{r.uid},{r.wave_index},{r.pss_total},{r.jss_total},"
            f"{r.role_conflict_total},{r.role_ambiguity_total},"
            f"{r.family_support_total},{r.family_support_mean:.2f}"
        )
    return "\n".join(lines) + "\n"
