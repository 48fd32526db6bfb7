"""Descriptive statistics and the two declared significance tests."""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .special import chi_square_upper_p, student_t_two_sided_p


class TooFewObservations(ValueError):
    """Sample too small for the requested statistic."""


class ZeroExpectedCount(ValueError):
    """A contingency-table cell has expected count zero."""


@dataclass(frozen=True)
class TestResult:
    statistic: float
    df: float
    p_value: float


def describe(xs) -> tuple[float, float]:
    """Sample mean and standard deviation (n-1 denominator)."""
    xs = np.asarray(xs, dtype=float)
    if xs.size < 2:
        raise TooFewObservations(f"describe needs n >= 2, got n={xs.size}")
    return float(xs.mean()), float(xs.std(ddof=1))


def t_test(a, b, pooled: bool = True) -> TestResult:
    """Two-sample t-test, pooled-variance Student form by default.

    With ``pooled=False`` the Welch statistic and Welch-Satterthwaite
    degrees of freedom are used instead. The two-sided p-value comes from
    the regularized incomplete beta.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise TooFewObservations(f"t_test needs n >= 2 per sample, got {na} and {nb}")
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if pooled:
        df = float(na + nb - 2)
        sp2 = ((na - 1) * va + (nb - 1) * vb) / df
        denom = sqrt(sp2 * (1.0 / na + 1.0 / nb))
    else:
        sea, seb = va / na, vb / nb
        denom = sqrt(sea + seb)
        df = (sea + seb) ** 2 / (sea**2 / (na - 1) + seb**2 / (nb - 1))
    if denom == 0.0:
        # Identical constant samples: no evidence of a difference.
        return TestResult(statistic=0.0, df=df, p_value=1.0)
    t = float((ma - mb) / denom)
    return TestResult(statistic=t, df=df, p_value=student_t_two_sided_p(t, df))


def chi_square(table, yates: bool = False) -> TestResult:
    """Pearson chi-square test of independence on an r x c count table.

    ``yates`` applies the continuity correction (only meaningful for 2x2
    tables; off by default).
    """
    obs = np.asarray(table, dtype=float)
    if obs.ndim != 2 or obs.shape[0] < 2 or obs.shape[1] < 2:
        raise ValueError(f"chi_square needs an r x c table with r, c >= 2, got shape {obs.shape}")
    if (obs < 0).any():
        raise ValueError("counts must be non-negative")
    row = obs.sum(axis=1, keepdims=True)
    col = obs.sum(axis=0, keepdims=True)
    total = obs.sum()
    if total == 0:
        raise ZeroExpectedCount("empty table")
    expected = row @ col / total
    if (expected == 0).any():
        raise ZeroExpectedCount("expected count of zero; collapse sparse categories first")
    diff = np.abs(obs - expected)
    if yates:
        diff = np.maximum(diff - 0.5, 0.0)
    stat = float((diff**2 / expected).sum())
    df = float((obs.shape[0] - 1) * (obs.shape[1] - 1))
    return TestResult(statistic=stat, df=df, p_value=chi_square_upper_p(stat, df))
