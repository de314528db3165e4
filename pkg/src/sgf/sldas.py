"""Continuous-to-discrete action projection: normalization, exact k-NN, critic selection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import CanvasConfig


def _divisors(cfg: CanvasConfig) -> np.ndarray:
    # Z == 1 maps z to 0 instead of dividing by zero
    return np.array([cfg.W - 1, cfg.H - 1, max(cfg.Z - 1, 1)], dtype=float)


def normalize(a, cfg: CanvasConfig) -> np.ndarray:
    """Map anchor(s) ``(x, y, z)`` into the unit cube; works on (3,) or (n, 3)."""
    return np.asarray(a, dtype=float) / _divisors(cfg)


def denormalize(alpha, cfg: CanvasConfig) -> np.ndarray:
    return np.asarray(alpha, dtype=float) * _divisors(cfg)


def distances(alpha, pts_norm: np.ndarray) -> np.ndarray:
    """Euclidean distances from ``alpha`` to each row of ``pts_norm``."""
    d = pts_norm - np.asarray(alpha, dtype=float)
    return np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2])


@dataclass(frozen=True)
class CandidateSet:
    anchors: np.ndarray     # (m, 3) int, nearest first
    dists: np.ndarray       # (m,) nondecreasing

    @property
    def psi_k(self) -> float:
        return float(self.dists[0])

    def __len__(self) -> int:
        return len(self.anchors)


def knn(alpha, legal: np.ndarray, k: int, cfg: CanvasConfig) -> CandidateSet:
    """Exact k nearest legal anchors to ``alpha``; ties go to the smaller (x, y, z).

    ``legal`` is an (n, 3) array of anchors. The scan is exhaustive: legal sets
    are at most ``W*H*Z`` rows and the nearest-proposal radius must be exact.
    """
    legal = np.asarray(legal)
    if legal.ndim != 2 or len(legal) == 0:
        raise ValueError("knn needs a nonempty legal set")
    if k < 1:
        raise ValueError("k must be >= 1")
    d = distances(alpha, normalize(legal, cfg))
    order = np.lexsort((legal[:, 2], legal[:, 1], legal[:, 0], d))[:k]
    return CandidateSet(legal[order].astype(np.int64), d[order])


def select_action(predictions, target, weights=(1.0, 1.0, 1.0)) -> int:
    """Index of the prediction with the smallest weighted L1 error to ``target``.

    np.argmin returns the first minimum, so ties resolve to the nearest candidate.
    """
    p = np.atleast_2d(np.asarray(predictions, dtype=float))
    err = (np.abs(p - np.asarray(target, dtype=float)) * np.asarray(weights, dtype=float)).sum(axis=1)
    return int(np.argmin(err))
