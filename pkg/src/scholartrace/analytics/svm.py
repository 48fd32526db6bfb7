"""Linear soft-margin SVM trained by dual coordinate descent.

L1-loss dual with box constraints [0, C], swept in a fixed index order
for determinism. The bias enters as an augmented constant feature. The
reported KKT residual is the largest projected gradient over the final
sweep.
"""

from __future__ import annotations

import numpy as np

from .models import LinearModel, NonConvergence


class SingleClass(ValueError):
    """Training data contains only one of the two labels."""


def svm_train(
    X,
    y,
    C: float = 1.0,
    tol: float = 1e-6,
    max_iter: int = 10000,
    seed: int = 0,
) -> LinearModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("X must be n x d and y length n")
    if not set(np.unique(y).tolist()) <= {-1.0, 1.0}:
        raise ValueError("labels must be -1/+1")
    if len(np.unique(y)) < 2:
        raise SingleClass("both classes must be present")
    if C <= 0.0:
        raise ValueError("C must be positive")

    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    qii = (Xa**2).sum(axis=1)
    alpha = np.zeros(n)
    w = np.zeros(d + 1)
    residual = np.inf
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        residual = 0.0
        for i in range(n):
            g = y[i] * float(Xa[i] @ w) - 1.0
            a = alpha[i]
            if a <= 0.0:
                pg = min(g, 0.0)
            elif a >= C:
                pg = max(g, 0.0)
            else:
                pg = g
            if abs(pg) > residual:
                residual = abs(pg)
            if pg != 0.0:
                a_new = min(max(a - g / qii[i], 0.0), C)
                if a_new != a:
                    w += (a_new - a) * y[i] * Xa[i]
                    alpha[i] = a_new
        if residual <= tol:
            break
    converged = residual <= tol
    model = LinearModel(
        kind="svm",
        weights=w[:-1].copy(),
        bias=float(w[-1]),
        classes=(-1, 1),
        iterations=sweeps,
        converged=converged,
        seed=seed,
        diagnostics={"kkt_residual": float(residual), "C": C, "support_count": int((alpha > 0).sum())},
    )
    if not converged:
        raise NonConvergence(f"KKT residual {residual:.3e} > tol {tol:.0e} after {sweeps} sweeps", model)
    return model


def svm_decision(model: LinearModel, X) -> np.ndarray:
    if model.kind != "svm":
        raise ValueError(f"not an SVM model: {model.kind}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return X @ model.weights + model.bias


def svm_predict(model: LinearModel, x) -> np.ndarray | int:
    """Predict -1/+1; the boundary itself counts as +1."""
    scores = svm_decision(model, x)
    labels = np.where(scores >= 0.0, 1, -1)
    if np.asarray(x).ndim == 1:
        return int(labels[0])
    return labels
