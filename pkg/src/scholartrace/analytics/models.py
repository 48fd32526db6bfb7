"""Shared model container for the trained linear classifiers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NonConvergence(RuntimeError):
    """Solver hit its iteration budget; a partial model is attached."""

    def __init__(self, message: str, model=None):
        super().__init__(message)
        self.model = model


@dataclass(frozen=True)
class LinearModel:
    """Weights of a trained linear classifier plus training metadata.

    Multinomial fits store one weight row and bias per class (reference
    class included as zeros); the SVM stores a single weight vector and
    scalar bias.
    """

    kind: str
    weights: np.ndarray
    bias: np.ndarray | float
    classes: tuple
    iterations: int
    converged: bool
    seed: int
    diagnostics: dict

    def __post_init__(self):
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("model weights must be finite")
