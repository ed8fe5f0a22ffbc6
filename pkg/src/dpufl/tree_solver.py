"""Facility location on an HST: the threshold-marking algorithm and its Laplace-noised version.

Both algorithms mark vertices whose (noisy) subtree count ``N_v`` satisfies
``N_v * lam**level >= f`` (everything at level ``>= L'`` is marked), return the
minimal marked vertices as the super-set ``R``, and open the members of ``R``
that end up serving at least one client.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .hst import HstTree, extend_root, min_set_mask, subtree_counts
from .instance import CostBreakdown


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def compute_L_prime(f: float, epsilon: float, lam: float) -> int:
    """Smallest non-negative integer ``l`` with ``lam**l >= epsilon * f``."""
    if not (f > 0 and epsilon > 0 and lam > 1):
        raise ValueError("need f > 0, epsilon > 0 and lambda > 1")
    target = epsilon * f
    l = 0
    while lam ** l < target:
        l += 1
    return l


@dataclass(frozen=True)
class SolverParams:
    epsilon: float
    f: float
    lam: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.f > 0:
            raise ValueError("facility cost must be positive")
        if not 1 < self.lam <= 2:
            raise ValueError(f"lambda must lie in (1, 2], got {self.lam}")
        if self.lam == 2:
            warnings.warn("lambda = 2: the O(1/epsilon) ratio argument needs lambda < 2", stacklevel=3)

    @property
    def eta(self) -> float:
        return math.sqrt(self.lam)

    @property
    def c(self) -> float:
        eta = self.eta
        return (eta - 1) / eta ** 2

    @property
    def L_prime(self) -> int:
        return compute_L_prime(self.f, self.epsilon, self.lam)


def laplace_scale(level: int, p: SolverParams) -> float:
    """Noise scale ``f / (c * eta**(L' + level))`` used for vertices below level ``L'``."""
    if not 0 <= level < p.L_prime:
        raise ValueError(f"no noise at level {level} (L' = {p.L_prime})")
    return p.f / (p.c * p.eta ** (p.L_prime + level))


def laplace_from_uniform(u, b):
    """Inverse-CDF transform of ``u`` in ``(-1/2, 1/2)`` to a Laplace(0, b) variate."""
    u = np.asarray(u, dtype=float)
    return -b * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def _uniform_open(rng: np.random.Generator, size) -> np.ndarray:
    u = rng.random(size) - 0.5
    bad = u <= -0.5
    while np.any(bad):  # u = -1/2 maps to an infinite variate
        u[bad] = rng.random(int(bad.sum())) - 0.5
        bad = u <= -0.5
    return u


def sample_laplace(b: float, rng: np.random.Generator, size=None):
    if not b > 0:
        raise ValueError("Laplace scale must be positive")
    u = _uniform_open(rng, 1 if size is None else size)
    x = laplace_from_uniform(u, b)
    return float(x[0]) if size is None else x


@dataclass(frozen=True)
class MarkedSet:
    vertices: frozenset
    noisy_counts: Optional[dict] = None  # vertex -> noisy count, only for the noised algorithm


@dataclass(frozen=True)
class Solution:
    superset: frozenset
    open: frozenset
    assignment: tuple  # serving vertex per point, -1 where there are no clients
    costs: CostBreakdown
    seed: Optional[int] = None
    marked: Optional[MarkedSet] = None
    tree: Optional[HstTree] = field(default=None, compare=False, repr=False)


def nearest_members(t: HstTree, anc: np.ndarray, R_mask: np.ndarray):
    """Nearest member of ``R`` (tie: smallest vertex id) and its distance for each leaf column of ``anc``.

    ``anc`` is ``t.ancestors[:, leaves]``.  A member ``w`` whose lowest common ancestor
    with the leaf sits at level ``B`` is ``prefix[B] + prefix[B] - prefix[level(w)]``
    away, so per ancestor only the highest member below it matters.
    """
    V = t.n_vertices
    kb = V + 1
    key = np.where(R_mask, t.level * kb + (V - np.arange(V)), -1)
    for l in range(t.depth):
        vs = t.by_level[l]
        np.maximum.at(key, t.parent[vs], key[vs])
    p = t.prefix
    n = anc.shape[1]
    best_d = np.full(n, np.inf)
    best_id = np.full(n, V, dtype=np.int64)
    for B in range(t.depth + 1):
        if p[B] > best_d.max(initial=-np.inf):
            break
        k = key[anc[B]]
        ok = k >= 0
        if not ok.any():
            continue
        j = k // kb
        vid = V - (k - j * kb)
        d = p[B] + (p[B] - p[np.maximum(j, 0)])
        better = ok & ((d < best_d) | ((d == best_d) & (vid < best_id)))
        best_d = np.where(better, d, best_d)
        best_id = np.where(better, vid, best_id)
    return best_id, best_d


class TreeSolver:
    """Precomputed state for repeated solves of one (tree, clients, f, epsilon) instance.

    The tree is extended upward when it is shallower than ``L'``.
    """

    def __init__(self, tree: HstTree, clients, f: float, epsilon: float):
        self.params = SolverParams(epsilon, f, tree.lam)
        L1 = self.params.L_prime
        self.tree = extend_root(tree, L1) if tree.depth < L1 else tree
        t = self.tree
        self.clients = np.asarray(clients, dtype=np.int64)
        if len(self.clients) != t.n_points:
            raise ValueError(f"got {len(self.clients)} client counts for {t.n_points} tree points")
        self.counts = subtree_counts(t, self.clients)
        self.L_prime = L1
        self.powers = np.array([t.lam ** l for l in range(t.depth + 1)])
        self.vpow = self.powers[t.level]
        self.always = t.level >= L1
        # noised vertices in id order: the draw order is part of the reproducibility contract
        self.noisy_ids = np.flatnonzero(~self.always)
        if L1 > 0:
            scales = [laplace_scale(l, self.params) for l in range(L1)]
            self.noisy_scales = np.asarray(scales)[t.level[self.noisy_ids]]
        else:
            self.noisy_scales = np.zeros(0)
        self._pts = np.flatnonzero(self.clients > 0)
        self._leaves = t.leaf_of_point[self._pts]
        self._w = self.clients[self._pts].astype(float)
        self._anc = t.ancestors[:, self._leaves]

    # -- marking ------------------------------------------------------------------

    def mark_base_mask(self) -> np.ndarray:
        return self.always | (self.counts * self.vpow >= self.params.f)

    def mark_noisy_mask(self, rng) -> tuple[np.ndarray, np.ndarray]:
        rng = make_rng(rng)
        noise = laplace_from_uniform(_uniform_open(rng, len(self.noisy_ids)), self.noisy_scales)
        noisy = self.counts[self.noisy_ids] + noise
        marked = self.always.copy()
        marked[self.noisy_ids] = noisy * self.vpow[self.noisy_ids] >= self.params.f
        return marked, noisy

    def finish(self, marked: np.ndarray, return_all_marked: bool = False):
        R = marked.copy() if return_all_marked else min_set_mask(self.tree, marked)
        if len(self._pts) == 0:
            return R, frozenset(), np.full(len(self.clients), -1), CostBreakdown(0.0, 0.0)
        ids, dist = nearest_members(self.tree, self._anc, R)
        S = frozenset(map(int, np.unique(ids)))
        assignment = np.full(len(self.clients), -1, dtype=np.int64)
        assignment[self._pts] = ids
        cost = CostBreakdown(len(S) * self.params.f, float(np.dot(self._w, dist)))
        return R, S, assignment, cost

    def _solution(self, marked, noisy, seed, return_all_marked, leaf_only) -> Solution:
        R, S, assignment, cost = self.finish(marked, return_all_marked)
        noisy_map = None
        if noisy is not None:
            noisy_map = {int(v): float(x) for v, x in zip(self.noisy_ids, noisy)}
        sol = Solution(
            superset=frozenset(map(int, np.flatnonzero(R))),
            open=S,
            assignment=tuple(int(a) for a in assignment),
            costs=cost,
            seed=seed,
            marked=MarkedSet(frozenset(map(int, np.flatnonzero(marked))), noisy_map),
            tree=self.tree,
        )
        return project_to_leaves(sol, self.clients) if leaf_only else sol

    def solve_base(self, return_all_marked=False, leaf_only=False) -> Solution:
        return self._solution(self.mark_base_mask(), None, None, return_all_marked, leaf_only)

    def solve_dp(self, rng=None, return_all_marked=False, leaf_only=False) -> Solution:
        seed = rng if isinstance(rng, (int, np.integer)) else None
        marked, noisy = self.mark_noisy_mask(rng)
        return self._solution(marked, noisy, seed, return_all_marked, leaf_only)

    def dp_cost(self, rng) -> CostBreakdown:
        """Cost of one noised solve without building a :class:`Solution` (for Monte-Carlo loops)."""
        marked, _ = self.mark_noisy_mask(rng)
        return self.finish(marked)[3]


def project_to_leaves(sol: Solution, clients) -> Solution:
    """Move every open internal vertex to the smallest-id leaf below it."""
    t = sol.tree
    canon = t.canonical
    assignment = tuple(int(canon[a]) if a >= 0 else -1 for a in sol.assignment)
    S = frozenset(int(canon[s]) for s in sol.open)
    conn = 0.0
    for pnt, a in enumerate(assignment):
        if a >= 0 and clients[pnt] > 0:
            conn += float(clients[pnt]) * t.point_distance(pnt, a)
    return Solution(sol.superset, S, assignment, CostBreakdown(sol.costs.facility, conn),
                    sol.seed, sol.marked, t)


# -- functional interface --------------------------------------------------------------

def mark_base(t: HstTree, counts, p: SolverParams) -> MarkedSet:
    if t.depth < p.L_prime:
        raise ValueError("tree depth below L'; extend the root first")
    counts = np.asarray(counts)
    vpow = np.array([t.lam ** int(l) for l in t.level])
    m = (t.level >= p.L_prime) | (counts * vpow >= p.f)
    return MarkedSet(frozenset(map(int, np.flatnonzero(m))))


def mark_noisy(t: HstTree, counts, p: SolverParams, rng) -> MarkedSet:
    if t.depth < p.L_prime:
        raise ValueError("tree depth below L'; extend the root first")
    rng = make_rng(rng)
    counts = np.asarray(counts)
    ids = np.flatnonzero(t.level < p.L_prime)
    scales = np.array([laplace_scale(int(t.level[v]), p) for v in ids])
    noisy = counts[ids] + laplace_from_uniform(_uniform_open(rng, len(ids)), scales)
    vpow = np.array([t.lam ** int(l) for l in t.level])
    m = t.level >= p.L_prime
    m[ids] = noisy * vpow[ids] >= p.f
    return MarkedSet(frozenset(map(int, np.flatnonzero(m))),
                     {int(v): float(x) for v, x in zip(ids, noisy)})


def select_superset(t: HstTree, M: MarkedSet) -> frozenset:
    from .hst import min_set
    return min_set(t, M.vertices)


def closest_facility_rule(t: HstTree, clients, R, f: float = 1.0):
    """Assign populated points to their nearest member of ``R``; returns ``(S, assignment, costs)``."""
    R = set(R)
    if not R:
        raise ValueError("empty super-set")
    clients = np.asarray(clients)
    mask = np.zeros(t.n_vertices, dtype=bool)
    mask[list(R)] = True
    pts = np.flatnonzero(clients > 0)
    if len(pts) == 0:
        return frozenset(), tuple([-1] * len(clients)), CostBreakdown(0.0, 0.0)
    ids, dist = nearest_members(t, t.ancestors[:, t.leaf_of_point[pts]], mask)
    S = frozenset(map(int, np.unique(ids)))
    assignment = np.full(len(clients), -1, dtype=np.int64)
    assignment[pts] = ids
    conn = float(np.dot(clients[pts].astype(float), dist))
    return S, tuple(map(int, assignment)), CostBreakdown(len(S) * f, conn)


def solve_tree_base(t: HstTree, clients, f: float, epsilon: float, *,
                    return_all_marked=False, leaf_only=False) -> Solution:
    return TreeSolver(t, clients, f, epsilon).solve_base(return_all_marked, leaf_only)


def solve_tree_dp(t: HstTree, clients, f: float, epsilon: float, rng=None, *,
                  return_all_marked=False, leaf_only=False) -> Solution:
    return TreeSolver(t, clients, f, epsilon).solve_dp(rng, return_all_marked, leaf_only)
