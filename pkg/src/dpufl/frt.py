"""Random embedding of a finite metric into a lambda-HST (permutation + random radius scheme).

The level-``i`` cells are formed by sending every point to the first point of a
random permutation within distance ``beta * lam**(i - 2)`` and intersecting with
the parent cell.  With edge weights ``lam**i`` a pair split below a level-``i+1``
cell is ``2 * sum_{k <= i} lam**k`` apart in the tree, which is never less than
the ``2 * beta * lam**(i - 1)`` diameter of that cell, so distances never shrink.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .hst import HstTree
from .instance import Metric

RADIUS_OFFSET = 2


@dataclass(frozen=True, eq=False)
class EmbeddingResult:
    tree: HstTree
    leaf_of_point: tuple  # leaf vertex per original point (duplicates share a leaf)
    beta: float
    permutation: tuple  # order of representative points

    def point_distances(self) -> np.ndarray:
        leaves = np.asarray(self.leaf_of_point)
        return self.tree.distance_table(leaves, leaves)


def rescale_metric(m: Metric) -> tuple[Metric, float]:
    """Divide by the smallest nonzero distance; returns the metric and that scale."""
    nz = m.dist[m.dist > 0]
    if nz.size == 0:
        raise ValueError("degenerate metric: no nonzero distance")
    scale = float(nz.min())
    if scale == 1.0:
        return m, 1.0
    return Metric(m.dist / scale), scale


def _representatives(d: np.ndarray) -> np.ndarray:
    """Smallest index at distance zero from each point."""
    return np.argmax(d <= 0, axis=1)


def _depth_for(diameter: float, lam: float) -> int:
    """``ceil(log_lam diameter) + 1``: pairs split right under the root are ``>= 2 lam**(L-1)`` apart."""
    k = 0
    while lam ** k < diameter:
        k += 1
    return k + 1


def frt_embed(m: Metric, lam: float, rng, radius_offset: int = RADIUS_OFFSET) -> EmbeddingResult:
    """Embed a metric whose nonzero distances are at least 1 into a ``lam``-HST.

    ``radius_offset`` sets the cell radius ``beta * lam**(i - radius_offset)``; the
    default keeps the embedding non-contracting for every ``lam`` in ``(1, 2]``.
    """
    if not 1 < lam <= 2:
        raise ValueError(f"lambda must lie in (1, 2], got {lam}")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    d = m.dist
    nz = d[d > 0]
    if nz.size and nz.min() < 1 - 1e-12:
        raise ValueError("rescale the metric first: minimum nonzero distance is below 1")
    rep = _representatives(d)
    reps = np.flatnonzero(rep == np.arange(m.n))
    k = len(reps)
    dr = d[np.ix_(reps, reps)]

    beta = float(lam ** rng.random())
    perm = rng.permutation(k)
    diameter = float(dr.max()) if k > 1 else 0.0
    L = _depth_for(diameter, lam) if k > 1 else 1

    # cell label per level, top-down; label = vertex id in the tree being built
    level, parent, point = [L], [-1], [-1]
    cell = np.zeros(k, dtype=np.int64)
    by_perm = dr[:, perm]
    for i in range(L - 1, -1, -1):
        radius = beta * lam ** (i - radius_offset)
        center = np.argmax(by_perm <= radius, axis=1)  # position in perm of the first center in range
        new_cell = np.empty(k, dtype=np.int64)
        seen: dict = {}
        order = np.lexsort((center, cell))
        for pnt in order:
            key = (int(cell[pnt]), int(center[pnt]))
            if key not in seen:
                level.append(i)
                parent.append(key[0])
                point.append(-1)
                seen[key] = len(level) - 1
            new_cell[pnt] = seen[key]
        cell = new_cell
    if len(set(cell.tolist())) != k:
        raise AssertionError("level-0 cells are not singletons")
    for j, v in enumerate(cell):
        point[v] = int(reps[j])
    # points are the representatives; duplicates map onto their representative's leaf
    point_ids = np.asarray(point)
    tree = HstTree(lam, L, level, parent, _compact_points(point_ids))
    leaf_of_rep = {int(reps[j]): int(cell[j]) for j in range(k)}
    leaf_of_point = tuple(leaf_of_rep[int(rep[p])] for p in range(m.n))
    return EmbeddingResult(tree, leaf_of_point, beta, tuple(int(reps[j]) for j in perm))


def _compact_points(point_ids: np.ndarray) -> np.ndarray:
    """Renumber leaf point ids to ``0..k-1`` in increasing order of the original id."""
    out = point_ids.copy()
    leaves = np.flatnonzero(point_ids >= 0)
    ranks = np.argsort(np.argsort(point_ids[leaves]))
    out[leaves] = ranks
    return out


@dataclass(frozen=True)
class ExpansionStats:
    mean_ratio: np.ndarray  # per pair, NaN on the diagonal and for coincident points
    max_ratio: np.ndarray
    min_ratio: float
    global_mean: float
    global_max: float
    worst_pair_mean: float


def expansion_stats(m: Metric, results) -> ExpansionStats:
    """Per-pair mean / max of ``d_T / d`` over a list of embeddings."""
    results = list(results)
    if not results:
        raise ValueError("need at least one embedding")
    d = m.dist
    pos = d > 0
    stack = np.stack([r.point_distances() for r in results])
    ratios = np.where(pos, stack / np.where(pos, d, 1.0), np.nan)
    if not pos.any():
        empty = np.full(d.shape, np.nan)
        return ExpansionStats(empty, empty, np.nan, np.nan, np.nan, np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN diagonal
        mean = np.nanmean(ratios, axis=0)
        mx = np.nanmax(ratios, axis=0)
    return ExpansionStats(mean, mx, float(np.nanmin(ratios)), float(np.nanmean(mean)),
                          float(np.nanmax(mx)), float(np.nanmax(mean)))
