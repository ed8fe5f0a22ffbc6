"""Exact optima for desk-scale instances: subset enumeration and an HST dynamic program."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .hst import HstTree, subtree_counts
from .instance import UflInstance

MAX_EXHAUSTIVE = 20
_LOW_BITS = 12


@dataclass(frozen=True)
class OptResult:
    opt_cost: float
    opt_set: frozenset


def _subset_minima(cols: np.ndarray) -> np.ndarray:
    """Row ``mask`` holds the element-wise minimum of the columns selected by ``mask``."""
    k, n = cols.shape
    out = np.full((1 << k, n), np.inf)
    for b in range(k):
        out[1 << b: 1 << (b + 1)] = np.minimum(out[: 1 << b], cols[b])
    return out


def _popcounts(k: int) -> np.ndarray:
    pc = np.zeros(1 << k, dtype=np.int64)
    for b in range(k):
        pc[1 << b: 1 << (b + 1)] = pc[: 1 << b] + 1
    return pc


def opt_exhaustive(inst: UflInstance, d=None, candidates=None) -> OptResult:
    """Minimum total cost over every facility subset, by enumeration.

    ``d`` is the distance source: ``None`` for the instance metric, an ``n x k``
    table (point to candidate), or an :class:`HstTree`, in which case the
    candidates are vertex ids (the leaves unless ``candidates`` says otherwise,
    ``"all"`` for every tree vertex).  Ties resolve to the lexicographically
    smallest sorted candidate tuple.
    """
    if isinstance(d, HstTree):
        if candidates is None:
            candidates = sorted(map(int, d.leaves))
        elif candidates == "all":
            candidates = list(range(d.n_vertices))
        candidates = sorted(candidates)
        table = d.point_distance_table(candidates)
    elif d is None:
        candidates = list(range(inst.n)) if candidates is None else sorted(candidates)
        table = inst.metric.dist[:, candidates]
    else:
        table = np.asarray(d, dtype=float)
        candidates = list(range(table.shape[1])) if candidates is None else list(candidates)
    k = len(candidates)
    if k > MAX_EXHAUSTIVE:
        raise ValueError(f"{k} candidate locations is too many to enumerate "
                         f"(limit {MAX_EXHAUSTIVE}); use opt_tree_dp on an HST instead")
    nz = np.flatnonzero(inst.clients)
    if len(nz) == 0:
        return OptResult(0.0, frozenset())
    w = inst.clients[nz].astype(float)
    f = inst.facility_cost
    cols = table[nz, :].T  # k x clients

    lo = min(k, _LOW_BITS)
    hi = k - lo
    low_min = _subset_minima(cols[:lo])
    high_min = _subset_minima(cols[lo:])
    low_pc, high_pc = _popcounts(lo), _popcounts(hi)

    best = math.inf
    ties: list[int] = []
    for h in range(1 << hi):
        conn = np.minimum(low_min, high_min[h]) @ w
        cost = f * (low_pc + high_pc[h]) + conn
        m = cost.min()
        if m < best:
            best, ties = float(m), []
        if m == best:
            ties.extend(int((h << lo) | l) for l in np.flatnonzero(cost == m))
    sets = [tuple(candidates[b] for b in range(k) if mask >> b & 1) for mask in ties]
    return OptResult(best, frozenset(min(sets)))


def opt_tree_dp(t: HstTree, clients, f: float, leaves_only: bool = False) -> OptResult:
    """Exact optimum on the tree metric by dynamic programming over vertices.

    Facilities may sit at any tree vertex (only at leaves with ``leaves_only``).
    The state for vertex ``u`` is the distance ``D`` from ``u`` to the nearest open
    facility outside its subtree; the value is a table over ``j``, the highest level
    of an open facility inside the subtree (``-1`` for none).  Siblings see each
    other's facilities through the parent, which is why ``j`` is tracked.
    """
    counts = subtree_counts(t, clients)
    kids = t.children
    p = t.prefix
    lam = t.lam
    INF = math.inf
    EMPTY = frozenset()

    def conn(N, D):
        return 0.0 if N == 0 else N * D

    @lru_cache(maxsize=None)
    def F(u: int, D: float) -> dict:
        lu = int(t.level[u])
        if lu == 0:
            return {-1: (conn(counts[u], D), EMPTY), 0: (f, frozenset([u]))}
        cs = kids[u]
        e = lam ** (lu - 1)
        out: dict = {}

        if not leaves_only:
            total, fac = f, frozenset([u])
            for c in cs:
                cost, s = min(F(c, e).values(), key=lambda x: x[0])
                total += cost
                fac = fac | s
            out[lu] = (total, fac)

        # nothing open below u
        total, fac = 0.0, EMPTY
        for c in cs:
            cost, s = F(c, e + D)[-1]
            total += cost
        out[-1] = (total, fac)

        def down(j):  # distance from u to a level-j facility below it
            return p[lu] - p[j]

        for J in range(lu):
            best = (INF, EMPTY)
            d_others = e + min(D, down(J))
            for i, cstar in enumerate(cs):
                others = cs[:i] + cs[i + 1:]
                for K in range(-1, J + 1):
                    d_star = e + (D if K < 0 else min(D, down(K)))
                    top = F(cstar, d_star).get(J)
                    if top is None or top[0] == INF:
                        continue
                    rest = _exactly(F, others, d_others, K)
                    if rest is None:
                        continue
                    cost = top[0] + rest[0]
                    if cost < best[0]:
                        best = (cost, top[1] | rest[1])
            out[J] = best
        return out

    root_table = F(t.root, INF)
    if counts[t.root] == 0:
        return OptResult(0.0, EMPTY)
    cost, fac = min((v for j, v in root_table.items() if j >= 0), key=lambda x: x[0])
    return OptResult(float(cost), fac)


def _exactly(F, children, D, K):
    """Cheapest choice for ``children`` (all seeing outside distance ``D``) whose highest facility level is exactly ``K``."""
    if K < 0:
        total, fac = 0.0, frozenset()
        for c in children:
            cost, s = F(c, D)[-1]
            total += cost
        return total, fac
    if not children:
        return None
    base, fac, extra, extra_pick = 0.0, frozenset(), math.inf, None
    for c in children:
        table = F(c, D)
        a = min(((v, j) for j, v in table.items() if j <= K), key=lambda x: x[0][0])
        base += a[0][0]
        fac = fac | a[0][1]
        exact = table.get(K)
        if exact is not None:
            gap = exact[0] - a[0][0]
            if gap < extra:
                extra, extra_pick = gap, (a[0][1], exact[1])
    if extra_pick is None:
        return None
    return base + extra, (fac - extra_pick[0]) | extra_pick[1]


def approx_ratio(cost: float, opt: float) -> float:
    """``cost / opt``; 1 when both vanish and ``inf`` when only ``opt`` does."""
    if cost < 0 or opt < 0:
        raise ValueError("costs must be nonnegative")
    if opt == 0:
        return 1.0 if cost == 0 else math.inf
    return cost / opt
