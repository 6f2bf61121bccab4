"""Pareto dominance and the exact two-objective hypervolume (minimization)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ParetoFront:
    """Non-dominated objective pairs sorted by the first objective.

    ``indices[i]`` is the trial index that produced ``points[i]``.
    """

    points: np.ndarray
    indices: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.indices)

    def to_list(self) -> list[dict]:
        return [{"trial": i, "objectives": [float(a), float(b)]} for i, (a, b) in zip(self.indices, self.points)]


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """True when ``a`` is no worse than ``b`` everywhere and better somewhere."""
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def pareto_front(points: Sequence[Sequence[float]] | np.ndarray, indices: Sequence[int] | None = None) -> ParetoFront:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    idx = list(range(len(pts))) if indices is None else list(indices)
    if len(idx) != len(pts):
        raise ValueError("indices and points differ in length")
    if not np.all(np.isfinite(pts)):
        raise ValueError("objective values must be finite")
    order = sorted(range(len(pts)), key=lambda i: (pts[i, 0], pts[i, 1], idx[i]))
    keep = []
    best_second = np.inf
    for i in order:
        if pts[i, 1] < best_second:
            keep.append(i)
            best_second = pts[i, 1]
    return ParetoFront(pts[keep].reshape(-1, 2), tuple(idx[i] for i in keep))


def hypervolume_2d(front: ParetoFront | np.ndarray, ref: Sequence[float]) -> float:
    """Area dominated by ``front`` and bounded by ``ref``.

    Points lying on the reference boundary contribute nothing; a point
    beyond it is an error. Raw arrays are reduced to their front first.
    """
    if not isinstance(front, ParetoFront):
        front = pareto_front(front)
    r1, r2 = float(ref[0]), float(ref[1])
    pts = front.points
    if len(pts) and (np.any(pts[:, 0] > r1) or np.any(pts[:, 1] > r2)):
        raise ValueError("every front point must dominate the reference point")
    xs = np.append(pts[:, 0], r1)
    return float(np.sum((xs[1:] - xs[:-1]) * (r2 - pts[:, 1])))


def reference_point(values: np.ndarray, margin: float = 0.1) -> tuple[float, float]:
    """Component-wise worst value pushed out by ``margin`` times the spread.

    With zero spread the push is ``margin * max(|worst|, 1)``.
    """
    v = np.asarray(values, dtype=float).reshape(-1, 2)
    worst = v.max(0)
    spread = worst - v.min(0)
    pad = np.where(spread > 0, spread, np.maximum(np.abs(worst), 1.0)) * margin
    return float(worst[0] + pad[0]), float(worst[1] + pad[1])
