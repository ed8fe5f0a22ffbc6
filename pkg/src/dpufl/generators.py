"""Random instance generators shared by the benchmark and the test-suite."""

from __future__ import annotations

import numpy as np

from .hst import HstTree
from .instance import Metric, UflInstance


def random_hst(rng: np.random.Generator, n_leaves: int, depth: int, lam: float = 1.5,
               max_children: int = 3) -> HstTree:
    """Random HST with ``n_leaves`` leaves, splitting leaf budgets top-down.

    Vertex ids are assigned breadth-first; leaf points are numbered left to right.
    """
    if n_leaves < 1 or depth < 1:
        raise ValueError("need at least one leaf and depth >= 1")
    level, parent, point = [depth], [-1], [-1]
    frontier = [(0, n_leaves)]
    for l in range(depth - 1, -1, -1):
        nxt = []
        for v, budget in frontier:
            if l == 0:
                parts = [1] * budget
            else:
                k = int(rng.integers(1, min(max_children, budget) + 1))
                cuts = np.sort(rng.choice(np.arange(1, budget), size=k - 1, replace=False)) if k > 1 else []
                bounds = [0, *map(int, cuts), budget]
                parts = [b - a for a, b in zip(bounds, bounds[1:])]
            for size in parts:
                level.append(l)
                parent.append(v)
                point.append(-1)
                nxt.append((len(level) - 1, size))
        frontier = nxt
    pid = 0
    for v, _ in frontier:
        point[v] = pid
        pid += 1
    return HstTree(lam, depth, level, parent, point)


def random_clients(rng: np.random.Generator, n: int, max_count: int = 5, p_zero: float = 0.4) -> np.ndarray:
    counts = rng.integers(1, max_count + 1, size=n)
    counts[rng.random(n) < p_zero] = 0
    return counts


def dyadic(rng: np.random.Generator, low: float, high: float, denom: int = 8) -> float:
    """Random multiple of ``1/denom`` in ``[low, high]``; keeps HST costs exact in binary floating point."""
    return int(rng.integers(int(np.ceil(low * denom)), int(high * denom) + 1)) / denom


def random_euclidean(rng: np.random.Generator, n: int, dim: int = 2, f: float | None = None,
                     max_count: int = 5, p_zero: float = 0.3) -> UflInstance:
    x = rng.random((n, dim))
    metric = Metric.from_coords(x)
    if f is None:
        nz = metric.dist[metric.dist > 0]
        f = float(rng.uniform(0.5, 3.0) * nz.mean()) if nz.size else 1.0
    return UflInstance(metric, f, random_clients(rng, n, max_count, p_zero))
