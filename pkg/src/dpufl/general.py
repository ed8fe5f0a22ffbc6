"""General metrics: embed into a random HST, solve there, report costs in both metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .frt import EmbeddingResult, frt_embed, rescale_metric
from .hst import HstTree
from .instance import CostBreakdown, UflInstance
from .tree_solver import Solution, TreeSolver


@dataclass(frozen=True, eq=False)
class GeneralSolution:
    embedding: EmbeddingResult
    tree_solution: Solution  # in rescaled tree units, facilities may be internal vertices
    cost_in_tree: CostBreakdown  # leaf-projected facilities, tree metric, original units
    cost_in_original: CostBreakdown  # same facilities and assignment, original metric
    open: frozenset  # original point ids
    superset: frozenset  # published set, each member moved to its canonical leaf's point
    assignment: tuple  # serving point per point, -1 without clients
    scale: float
    seed: Optional[int] = None
    tree_seed: Optional[int] = None


def _rngs(seed, tree_seed):
    if isinstance(seed, np.random.Generator):
        return (seed if tree_seed is None else np.random.default_rng([tree_seed, 0])), seed
    tree_src = seed if tree_seed is None else tree_seed
    tree_rng = np.random.default_rng(None if tree_src is None else [tree_src, 0])
    noise_rng = np.random.default_rng(None if seed is None else [seed, 1])
    return tree_rng, noise_rng


def _single_leaf(n: int, lam: float) -> EmbeddingResult:
    tree = HstTree(lam, 1, [1, 0], [-1, 0], [-1, 0])
    return EmbeddingResult(tree, tuple([1] * n), 1.0, (0,))


def _solve(inst: UflInstance, epsilon: float, lam: float, seed, tree_seed, base: bool,
           ) -> GeneralSolution:
    if not 1 < lam <= 2:
        raise ValueError(f"lambda must lie in (1, 2], got {lam}")
    tree_rng, noise_rng = _rngs(seed, tree_seed)
    if (inst.metric.dist > 0).any():
        metric, scale = rescale_metric(inst.metric)
        emb = frt_embed(metric, lam, tree_rng)
    else:  # every point coincides
        scale = 1.0
        emb = _single_leaf(inst.n, lam)

    tree = emb.tree
    leaf_of_point = np.asarray(emb.leaf_of_point)
    tree_pt = tree.point[leaf_of_point]  # tree point id per original point
    tree_clients = np.zeros(tree.n_points, dtype=np.int64)
    np.add.at(tree_clients, tree_pt, inst.clients)

    solver = TreeSolver(tree, tree_clients, inst.facility_cost / scale, epsilon)
    tsol = solver.solve_base() if base else solver.solve_dp(noise_rng)
    t = tsol.tree

    # original point standing for each tree point: the smallest original id on that leaf
    rep_of_tree_pt = np.full(tree.n_points, -1, dtype=np.int64)
    for p in range(inst.n - 1, -1, -1):
        rep_of_tree_pt[tree_pt[p]] = p

    canon = t.canonical
    assignment = np.full(inst.n, -1, dtype=np.int64)
    conn_tree = conn_orig = 0.0
    d = inst.metric.dist
    for p in np.flatnonzero(inst.clients):
        serving_vertex = tsol.assignment[tree_pt[p]]
        leaf = int(canon[serving_vertex])
        q = int(rep_of_tree_pt[t.point[leaf]])
        assignment[p] = q
        w = float(inst.clients[p])
        conn_tree += w * t.distance(int(leaf_of_point[p]), leaf) * scale
        conn_orig += w * float(d[p, q])
    opened = frozenset(int(q) for q in assignment if q >= 0)
    superset = frozenset(int(rep_of_tree_pt[t.point[canon[v]]]) for v in tsol.superset)
    fac = len(opened) * inst.facility_cost
    return GeneralSolution(
        embedding=emb,
        tree_solution=tsol,
        cost_in_tree=CostBreakdown(fac, conn_tree),
        cost_in_original=CostBreakdown(fac, conn_orig),
        open=opened,
        superset=superset,
        assignment=tuple(map(int, assignment)),
        scale=scale,
        seed=seed if isinstance(seed, (int, np.integer)) else None,
        tree_seed=tree_seed,
    )


def solve_general(inst: UflInstance, epsilon: float, lam: float = 1.5, seed=None, *,
                  tree_seed=None) -> GeneralSolution:
    """Noised pipeline.  The embedding only ever sees the metric, never the client counts."""
    return _solve(inst, epsilon, lam, seed, tree_seed, base=False)


def solve_general_base(inst: UflInstance, epsilon: float, lam: float = 1.5, seed=None, *,
                       tree_seed=None) -> GeneralSolution:
    """Same pipeline with the noiseless marking; ``seed`` only drives the embedding."""
    return _solve(inst, epsilon, lam, seed, tree_seed, base=True)
