"""Fuzzy c-means clustering with the standard alternating updates.

Memberships u_ij = 1 / sum_k (d_ij / d_ik)^(2/(m-1)), centers as the
u^m-weighted means. Each iteration records the objective
J = sum u_ij^m d_ij^2 after both updates, which makes the trace
non-increasing by construction. Initialization is k-means++-style
seeding from the provided seed, so runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FcmResult:
    centers: np.ndarray
    membership: np.ndarray
    objective_trace: tuple[float, ...]
    iterations: int
    converged: bool
    seed: int

    @property
    def labels(self) -> np.ndarray:
        return self.membership.argmax(axis=1)


def _kmeanspp_init(X: np.ndarray, c: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, c):
        total = d2.sum()
        if total <= 0.0:
            # remaining mass is zero (duplicate-heavy data): pick unchosen uniformly
            pool = [i for i in range(n) if i not in chosen]
            chosen.append(int(pool[rng.integers(len(pool))]))
        else:
            chosen.append(int(rng.choice(n, p=d2 / total)))
        d2 = np.minimum(d2, ((X - X[chosen[-1]]) ** 2).sum(axis=1))
    return X[chosen].astype(float).copy()


def _memberships(dist: np.ndarray, m: float) -> np.ndarray:
    # Coincident points get full membership in their zero-distance
    # center(s) — the limit of the update rule.
    n, c = dist.shape
    u = np.zeros((n, c))
    zero_rows = (dist == 0.0).any(axis=1)
    if zero_rows.any():
        z = dist[zero_rows] == 0.0
        u[zero_rows] = z / z.sum(axis=1, keepdims=True)
    ok = ~zero_rows
    if ok.any():
        # scale by the row minimum so the power never overflows
        dmin = dist[ok].min(axis=1, keepdims=True)
        r = (dist[ok] / dmin) ** (-2.0 / (m - 1.0))
        u[ok] = r / r.sum(axis=1, keepdims=True)
    return u


def fuzzy_cmeans(
    X,
    c: int,
    m: float = 2.0,
    tol: float = 1e-6,
    max_iter: int = 500,
    seed: int = 0,
) -> FcmResult:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be an n x d matrix")
    n = X.shape[0]
    if c < 2:
        raise ValueError("need at least 2 clusters")
    if n < c:
        raise ValueError(f"need n >= c, got n={n} c={c}")
    if m <= 1.0:
        raise ValueError("fuzzifier m must exceed 1")

    rng = np.random.default_rng(seed)
    centers = _kmeanspp_init(X, c, rng)
    u_prev: np.ndarray | None = None
    trace: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        dist = np.sqrt(((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2))
        u = _memberships(dist, m)
        um = u**m
        mass = um.sum(axis=0)
        new_centers = centers.copy()
        nonzero = mass > 0.0
        new_centers[nonzero] = (um.T[nonzero] @ X) / mass[nonzero, None]
        centers = new_centers
        d2_new = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        trace.append(float((um * d2_new).sum()))
        if u_prev is not None and float(np.abs(u - u_prev).max()) < tol:
            converged = True
            u_prev = u
            break
        u_prev = u
    return FcmResult(
        centers=centers,
        membership=u_prev,
        objective_trace=tuple(trace),
        iterations=iterations,
        converged=converged,
        seed=seed,
    )
