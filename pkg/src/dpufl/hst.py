"""Hierarchically well-separated trees.

Vertices are integers ``0..V-1``.  Every root-to-leaf path has ``depth`` edges and
the edge between levels ``l`` and ``l + 1`` weighs ``lam ** l``.  Weights are never
stored; they follow from the levels.  Leaves carry the id of the point they
represent.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable

import numpy as np


def _ro(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HstTree:
    lam: float
    depth: int
    level: np.ndarray
    parent: np.ndarray  # -1 for the root
    point: np.ndarray  # point id for leaves, -1 elsewhere

    def __post_init__(self):
        object.__setattr__(self, "level", _ro(self.level, np.int64))
        object.__setattr__(self, "parent", _ro(self.parent, np.int64))
        object.__setattr__(self, "point", _ro(self.point, np.int64))

    # -- structure -----------------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.level)

    @cached_property
    def root(self) -> int:
        roots = np.flatnonzero(self.parent < 0)
        return int(roots[0])

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        kids: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for v, p in enumerate(self.parent):
            if p >= 0:
                kids[p].append(v)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def leaves(self) -> np.ndarray:
        return _ro(np.flatnonzero(self.point >= 0), np.int64)

    @cached_property
    def n_points(self) -> int:
        return int(self.point.max()) + 1 if len(self.leaves) else 0

    @cached_property
    def leaf_of_point(self) -> np.ndarray:
        out = np.full(self.n_points, -1, dtype=np.int64)
        out[self.point[self.leaves]] = self.leaves
        return _ro(out, np.int64)

    @cached_property
    def by_level(self) -> tuple[np.ndarray, ...]:
        """Vertex ids grouped by level, ids ascending within a level."""
        return tuple(_ro(np.flatnonzero(self.level == l), np.int64) for l in range(self.depth + 1))

    @cached_property
    def prefix(self) -> np.ndarray:
        """``prefix[k] = sum_{i < k} lam**i``: the distance from a level-``k`` vertex to any leaf below it."""
        p = np.zeros(self.depth + 2)
        for k in range(1, self.depth + 2):
            p[k] = p[k - 1] + self.lam ** (k - 1)
        return _ro(p, float)

    @cached_property
    def ancestors(self) -> np.ndarray:
        """``ancestors[l, v]``: ancestor of ``v`` at level ``l`` (``v`` itself at its own level), else -1."""
        anc = np.full((self.depth + 1, self.n_vertices), -1, dtype=np.int64)
        cur = np.arange(self.n_vertices)
        lev = self.level.copy()
        for _ in range(self.depth + 1):
            ok = (lev >= 0) & (lev <= self.depth) & (cur >= 0)
            anc[lev[ok], np.flatnonzero(ok)] = cur[ok]
            nxt = np.where(cur >= 0, self.parent[np.maximum(cur, 0)], -1)
            cur = nxt
            lev = lev + 1
        return _ro(anc, np.int64)

    @cached_property
    def canonical(self) -> np.ndarray:
        """Leaf with the smallest point id below each vertex."""
        best_pt = np.where(self.point >= 0, self.point, np.iinfo(np.int64).max)
        best_leaf = np.where(self.point >= 0, np.arange(self.n_vertices), -1)
        for l in range(self.depth):
            for v in self.by_level[l]:
                p = self.parent[v]
                if p >= 0 and best_pt[v] < best_pt[p]:
                    best_pt[p], best_leaf[p] = best_pt[v], best_leaf[v]
        return _ro(best_leaf, np.int64)

    def is_ancestor(self, u: int, v: int) -> bool:
        """True if ``u`` is an ancestor of ``v`` or equal to it."""
        lu = self.level[u]
        return lu >= self.level[v] and self.ancestors[lu, v] == u

    # -- metric -------------------------------------------------------------------

    def lca_level(self, u: int, v: int) -> int:
        for l in range(max(self.level[u], self.level[v]), self.depth + 1):
            if self.ancestors[l, u] == self.ancestors[l, v]:
                return l
        raise ValueError(f"vertices {u} and {v} are not connected")

    def distance(self, u: int, v: int) -> float:
        if u == v:
            return 0.0
        top = self.lca_level(u, v)
        p = self.prefix
        return float((p[top] - p[self.level[u]]) + (p[top] - p[self.level[v]]))

    def distance_table(self, rows=None, cols=None) -> np.ndarray:
        """Tree distances between two vertex lists (all vertices by default)."""
        rows = np.arange(self.n_vertices) if rows is None else np.asarray(rows, dtype=np.int64)
        cols = np.arange(self.n_vertices) if cols is None else np.asarray(cols, dtype=np.int64)
        lr, lc = self.level[rows], self.level[cols]
        top = np.full((len(rows), len(cols)), -1, dtype=np.int64)
        lo = np.maximum(lr[:, None], lc[None, :])
        for l in range(self.depth + 1):
            eq = (self.ancestors[l, rows][:, None] == self.ancestors[l, cols][None, :])
            eq &= (self.ancestors[l, rows][:, None] >= 0) & (l >= lo) & (top < 0)
            top[eq] = l
        p = self.prefix
        d = (p[top] - p[lr][:, None]) + (p[top] - p[lc][None, :])
        d[rows[:, None] == cols[None, :]] = 0.0
        return d

    def point_distance_table(self, cols=None) -> np.ndarray:
        """Distances from every point (row = point id) to the given vertices (default: all points)."""
        rows = self.leaf_of_point
        cols = rows if cols is None else cols
        return self.distance_table(rows, cols)

    def point_distance(self, p: int, v: int) -> float:
        """Distance from point ``p`` to vertex ``v``."""
        return self.distance(int(self.leaf_of_point[p]), int(v))

    def __eq__(self, other):
        if not isinstance(other, HstTree):
            return NotImplemented
        return (self.lam == other.lam and self.depth == other.depth
                and np.array_equal(self.level, other.level)
                and np.array_equal(self.parent, other.parent)
                and np.array_equal(self.point, other.point))

    __hash__ = None


def tree_distance(t: HstTree, u: int, v: int) -> float:
    return t.distance(u, v)


def validate_hst(t: HstTree) -> list[str]:
    """Structural problems with ``t``; an empty list means ``t`` is a valid HST."""
    problems = []
    V = t.n_vertices
    if not t.lam > 1:
        problems.append(f"lambda must exceed 1, got {t.lam}")
    if t.depth < 1:
        problems.append(f"depth must be >= 1, got {t.depth}")
    if not (len(t.parent) == len(t.point) == V):
        return problems + ["vertex arrays have different lengths"]
    roots = np.flatnonzero(t.parent < 0)
    if len(roots) != 1:
        return problems + [f"expected exactly one root, found {len(roots)}"]
    r = int(roots[0])
    if t.level[r] != t.depth:
        problems.append(f"root {r} has level {t.level[r]}, expected depth {t.depth}")
    for v in range(V):
        p = t.parent[v]
        if p >= V:
            problems.append(f"vertex {v} has unknown parent {p}")
            continue
        if p >= 0 and t.level[p] != t.level[v] + 1:
            problems.append(f"level violation: vertex {v} at level {t.level[v]} "
                            f"has parent {p} at level {t.level[p]}")
    # each root-to-leaf path must have exactly `depth` edges
    for v in range(V):
        steps, cur, seen = 0, v, set()
        while t.parent[cur] >= 0 and cur not in seen:
            seen.add(cur)
            cur = int(t.parent[cur])
            steps += 1
        if cur != r:
            problems.append(f"vertex {v} does not reach the root")
            continue
        is_leaf = not any(t.parent == v)
        if is_leaf and steps != t.depth:
            problems.append(f"path-length violation: leaf {v} is {steps} edges below the root, "
                            f"expected {t.depth}")
        if is_leaf and t.point[v] < 0:
            problems.append(f"leaf {v} carries no point")
        if not is_leaf and t.point[v] >= 0:
            problems.append(f"internal vertex {v} carries point {t.point[v]}")
    pts = t.point[t.point >= 0]
    if len(np.unique(pts)) != len(pts):
        problems.append("a point is attached to more than one leaf")
    elif len(pts) and (pts.min() != 0 or pts.max() != len(pts) - 1):
        problems.append("leaf points are not exactly 0..n-1")
    return problems


def subtree_counts(t: HstTree, clients) -> np.ndarray:
    """Clients in every subtree; ``clients`` is indexed by point id."""
    counts = np.zeros(t.n_vertices, dtype=np.int64)
    counts[t.leaf_of_point] = np.asarray(clients, dtype=np.int64)
    for l in range(t.depth):
        vs = t.by_level[l]
        np.add.at(counts, t.parent[vs], counts[vs])
    return counts


def _mask(t: HstTree, M) -> np.ndarray:
    if isinstance(M, np.ndarray) and M.dtype == bool:
        return M
    m = np.zeros(t.n_vertices, dtype=bool)
    m[list(M)] = True
    return m


def min_set_mask(t: HstTree, marked: np.ndarray) -> np.ndarray:
    """Boolean form of :func:`min_set` in one bottom-up pass."""
    below = np.zeros(t.n_vertices, dtype=bool)
    for l in range(t.depth):
        vs = t.by_level[l]
        hit = vs[marked[vs] | below[vs]]
        below[t.parent[hit]] = True
    return marked & ~below


def min_set(t: HstTree, M: Iterable[int]) -> frozenset[int]:
    """Members of ``M`` with no proper descendant in ``M``."""
    return frozenset(map(int, np.flatnonzero(min_set_mask(t, _mask(t, M)))))


class DeltaCase(Enum):
    UNCHANGED = "unchanged"
    ADDED = "added"
    REPLACED = "replaced"


def min_set_delta(t: HstTree, M: Iterable[int], v: int) -> tuple[DeltaCase, int | None]:
    """How ``min_set`` changes when ``v`` (not in ``M``) is added.

    Returns ``(UNCHANGED, None)``, ``(ADDED, None)`` or ``(REPLACED, u)`` where ``u`` is
    the ancestor of ``v`` that leaves the min-set.
    """
    M = set(M)
    if v in M:
        raise ValueError(f"vertex {v} is already in M")
    base = min_set(t, M)
    for u in base:
        if t.is_ancestor(v, u):
            return DeltaCase.UNCHANGED, None
    for u in base:
        if t.is_ancestor(u, v):
            return DeltaCase.REPLACED, u
    return DeltaCase.ADDED, None


def b_value(t: HstTree, counts, f: float, v: int) -> float:
    return min(f, float(counts[v]) * t.lam ** int(t.level[v]))


def is_antichain(t: HstTree, vs: Iterable[int]) -> bool:
    s = set(vs)
    for v in s:
        for l in range(int(t.level[v]) + 1, t.depth + 1):
            if int(t.ancestors[l, v]) in s:
                return False
    return True


def antichain_lower_bound(t: HstTree, counts, f: float, vs: Iterable[int]) -> float:
    """Sum of ``B_v`` over an antichain, a lower bound on the optimum on ``t``."""
    vs = list(vs)
    if not is_antichain(t, vs):
        raise ValueError("vertex set contains an ancestor-descendant pair")
    return float(sum(b_value(t, counts, f, v) for v in vs))


def extend_root(t: HstTree, target_depth: int) -> HstTree:
    """Stack new roots on top until the tree has ``target_depth`` levels; new ids are appended."""
    if target_depth <= t.depth:
        return t
    extra = target_depth - t.depth
    V = t.n_vertices
    level = np.concatenate([t.level, t.depth + 1 + np.arange(extra)])
    parent = np.concatenate([t.parent, np.full(extra, -1)])
    parent[t.root] = V
    for k in range(extra - 1):
        parent[V + k] = V + k + 1
    point = np.concatenate([t.point, np.full(extra, -1)])
    return HstTree(t.lam, target_depth, level, parent, point)


def canonical_leaf(t: HstTree, u: int) -> int:
    return int(t.canonical[u])


def from_parent_levels(lam: float, parent, level, point) -> HstTree:
    level = np.asarray(level)
    return HstTree(lam, int(level.max()), level, parent, point)


def star_tree(lam: float, n_leaves: int, depth: int) -> HstTree:
    """Root with ``n_leaves`` disjoint chains of ``depth`` edges; leaf ``i`` carries point ``i``."""
    level = [depth]
    parent = [-1]
    point = [-1]
    for i in range(n_leaves):
        prev = 0
        for l in range(depth - 1, -1, -1):
            level.append(l)
            parent.append(prev)
            point.append(i if l == 0 else -1)
            prev = len(level) - 1
    return HstTree(lam, depth, level, parent, point)
