"""Multinomial logistic regression by full-batch gradient ascent.

The penalized log-likelihood is maximized with a deterministic
backtracking line search (Armijo rule, doubling on success) starting
from zero weights; the reference class K-1 keeps zero weights. The
intercept column is excluded from the L2 penalty.
"""

from __future__ import annotations

import warnings

import numpy as np

from .models import LinearModel, NonConvergence

_ARMIJO = 1e-4
_MIN_STEP = 1e-18


def _augment(X: np.ndarray) -> np.ndarray:
    return np.hstack([X, np.ones((X.shape[0], 1))])


def _log_softmax(Z: np.ndarray) -> np.ndarray:
    zmax = Z.max(axis=1, keepdims=True)
    return Z - zmax - np.log(np.exp(Z - zmax).sum(axis=1, keepdims=True))


def _objective_grad(W: np.ndarray, Xa: np.ndarray, Y: np.ndarray, l2: float):
    # W is (K-1, d+1); class K-1 is the zero-weight reference.
    n = Xa.shape[0]
    Z = np.hstack([Xa @ W.T, np.zeros((n, 1))])
    logp = _log_softmax(Z)
    ll = logp[np.arange(n), Y].sum()
    P = np.exp(logp)
    onehot = np.zeros_like(P)
    onehot[np.arange(n), Y] = 1.0
    G = (onehot - P)[:, :-1].T @ Xa
    if l2 > 0.0:
        penalized = W.copy()
        penalized[:, -1] = 0.0  # intercepts unpenalized
        ll -= 0.5 * l2 * float((penalized**2).sum())
        G -= l2 * penalized
    return ll, G


def fit_multinomial_logit(
    X,
    y,
    l2: float = 0.0,
    tol: float = 1e-8,
    max_iter: int = 20000,
    seed: int = 0,
) -> LinearModel:
    """Fit a K-class multinomial logit; raises NonConvergence (with the
    partial model attached) when the gradient norm does not reach ``tol``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ValueError("X must be an n x d matrix")
    classes = tuple(sorted(np.unique(y).tolist()))
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    index = {c: i for i, c in enumerate(classes)}
    Y = np.array([index[v] for v in y.tolist()], dtype=int)
    n, d = X.shape
    if n <= d:
        warnings.warn(f"n={n} <= d={d}: fit is under-determined", stacklevel=2)
    K = len(classes)
    Xa = _augment(X)
    W = np.zeros((K - 1, d + 1))

    ll, G = _objective_grad(W, Xa, Y, l2)
    step = 1.0 / max(1.0, float(np.abs(Xa).sum(axis=1).max()) ** 2)
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        gnorm = float(np.sqrt((G**2).sum()))
        if gnorm <= tol:
            converged = True
            break
        g2 = gnorm * gnorm
        while step >= _MIN_STEP:
            W2 = W + step * G
            ll2, G2 = _objective_grad(W2, Xa, Y, l2)
            if ll2 >= ll + _ARMIJO * step * g2:
                W, ll, G = W2, ll2, G2
                step *= 2.0
                break
            step *= 0.5
        else:
            break  # step underflow: gradient numerically flat

    gnorm = float(np.sqrt((G**2).sum()))
    converged = converged or gnorm <= tol
    weights = np.vstack([W[:, :-1], np.zeros((1, d))])
    bias = np.concatenate([W[:, -1], [0.0]])
    model = LinearModel(
        kind="multinomial_logit",
        weights=weights,
        bias=bias,
        classes=classes,
        iterations=iterations,
        converged=converged,
        seed=seed,
        diagnostics={"log_likelihood": ll, "gradient_norm": gnorm, "l2": l2},
    )
    if not converged:
        raise NonConvergence(
            f"gradient norm {gnorm:.3e} > tol {tol:.0e} after {iterations} iterations", model
        )
    return model


def predict_proba(model: LinearModel, X) -> np.ndarray:
    if model.kind != "multinomial_logit":
        raise ValueError(f"not a multinomial model: {model.kind}")
    X = np.asarray(X, dtype=float)
    Z = X @ model.weights.T + model.bias
    return np.exp(_log_softmax(Z))


def predict(model: LinearModel, X) -> np.ndarray:
    proba = predict_proba(model, X)
    return np.array([model.classes[i] for i in proba.argmax(axis=1)])
