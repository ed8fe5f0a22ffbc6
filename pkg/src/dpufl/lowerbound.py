"""Uniform-star hard instances and policy evaluation against their exact optimum.

A star has a center ``b`` (point 0) and leaves ``a_1..a_n`` (points ``1..n``) at
radius ``sqrt(eps) * f``.  Leaves hold either 1 or ``m = ceil(1/eps)`` clients.
The harness accounting charges the center facility once and treats every leaf
as an independent two-point instance: open the leaf (``f``) or ship its clients
to the center (``N_i * radius``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .hst import star_tree
from .instance import Metric, UflInstance
from .tree_solver import TreeSolver


@dataclass(frozen=True)
class StarFamily:
    n: int
    f: float
    epsilon: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one leaf")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if not self.f > 0:
            raise ValueError("f must be positive")

    @property
    def m(self) -> int:
        return math.ceil(1 / self.epsilon - 1e-12)

    @property
    def radius(self) -> float:
        return math.sqrt(self.epsilon) * self.f

    @property
    def p_one(self) -> float:
        """Probability that a leaf holds a single client."""
        s = math.sqrt(self.m)
        return s / (s + 1)


def default_n(epsilon: float) -> int:
    return int(math.ceil(100 * math.sqrt(math.ceil(1 / epsilon - 1e-12))))


def make_star_instance(n: int, epsilon: float, f: float) -> UflInstance:
    r = math.sqrt(epsilon) * f
    d = np.full((n + 1, n + 1), 2 * r)
    d[0, :] = d[:, 0] = r
    np.fill_diagonal(d, 0.0)
    return UflInstance(Metric(d), f, np.zeros(n + 1, dtype=np.int64))


def sample_client_vector(family: StarFamily, rng) -> np.ndarray:
    """Client vector over ``b, a_1..a_n``: center empty, each leaf 1 or ``m`` independently."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    leaves = np.where(rng.random(family.n) < family.p_one, 1, family.m)
    return np.concatenate([[0], leaves]).astype(np.int64)


def _sqrt_exact(m):
    r = math.isqrt(m)
    return r if r * r == m else None


def two_point_cost_table(f, m: int) -> dict:
    """Cost of keeping ``a`` closed / opening it when ``a`` holds 1 or ``m`` clients.

    Exact (``Fraction``) whenever ``f`` is rational and ``m`` a perfect square.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    root = _sqrt_exact(m)
    if root is not None and isinstance(f, (int, Fraction)):
        f = Fraction(f)
        s = Fraction(root)
    else:
        s = math.sqrt(m)
    return {("D1", "closed"): f / s, ("D1", "open"): f,
            ("Dm", "closed"): s * f, ("Dm", "open"): f}


def expected_opt_per_leaf(f, m: int):
    s = math.sqrt(m)
    return 2 * f / (s + 1)


def harness_opt(clients: np.ndarray, family: StarFamily) -> float:
    """Center charged once plus the cheaper option at every leaf."""
    leaves = clients[1:].astype(float)
    return family.f + float(np.minimum(family.f, leaves * family.radius).sum())


def star_exact_opt(clients: np.ndarray, family: StarFamily) -> float:
    """Exact optimum of the literal star instance (the center is an ordinary location)."""
    f, r = family.f, family.radius
    leaves = clients[1:].astype(float)
    with_center = f + float(np.minimum(f, leaves * r).sum())
    # center closed: closed leaves travel 2r to some open leaf; at least one leaf must open
    per = np.minimum(f, 2 * r * leaves)
    penalty = float(np.min(f - per)) if np.all(per < f) else 0.0
    without_center = float(per.sum()) + penalty
    if not leaves.any():
        return 0.0
    return min(with_center, without_center)


@dataclass(frozen=True)
class Policy:
    kind: str  # "open-all", "open-none", "threshold", "dp-solver"
    threshold: int = 0
    epsilon: float | None = None
    lam: float = 1.5

    @classmethod
    def parse(cls, text: str, lam: float = 1.5) -> "Policy":
        name, _, arg = text.partition(":")
        if name in ("open-all", "open-none") and not arg:
            return cls(name, lam=lam)
        if name == "threshold":
            return cls(name, threshold=int(arg) if arg else 0, lam=lam)
        if name == "dp-solver":
            return cls(name, epsilon=float(arg) if arg else None, lam=lam)
        raise ValueError(f"unknown policy {text!r}")


@dataclass
class PolicyOutcome:
    costs: np.ndarray
    opts: np.ndarray
    lhs: float  # averaged two-scenario cost per leaf, left side of the averaged lower bound
    cond_cost_one: float  # mean per-leaf cost when the leaf holds 1 client
    cond_cost_m: float

    @property
    def ratios(self) -> np.ndarray:
        return self.costs / self.opts

    @property
    def ratio_of_means(self) -> float:
        return float(math.fsum(self.costs) / math.fsum(self.opts))

    @property
    def mean_ratio(self) -> float:
        return float(np.mean(self.ratios))

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios))


class _StarTreeRunner:
    """The star realized as an HST: root = center, one chain of ``L`` edges per leaf."""

    def __init__(self, family: StarFamily, epsilon: float, lam: float):
        L = 1
        target = family.radius
        while lam ** L / (lam - 1) < target:
            L += 1
        self.tree = star_tree(lam, family.n, L)
        rho = float(self.tree.prefix[L])  # root-to-leaf distance
        self.scale = rho / family.radius  # tree units per original unit
        self.family = family
        self.epsilon = epsilon
        # chain index of every vertex, -1 for the root
        chain = np.full(self.tree.n_vertices, -1)
        for leaf in self.tree.leaves:
            for l in range(L):
                chain[self.tree.ancestors[l, leaf]] = self.tree.point[leaf]
        self.chain = chain

    def per_leaf_costs(self, clients: np.ndarray, rng) -> tuple[float, np.ndarray]:
        fam = self.family
        leaves = clients[1:]
        solver = TreeSolver(self.tree, leaves, fam.f * self.scale, self.epsilon)
        sol = solver.solve_dp(rng)
        t = sol.tree
        per = np.zeros(fam.n)
        center = 0.0
        for v in sol.open:
            if v < len(self.chain) and self.chain[v] >= 0:
                per[self.chain[v]] += fam.f
            else:
                center += fam.f
        for i, a in enumerate(sol.assignment):
            if a >= 0:
                per[i] += leaves[i] * t.point_distance(i, a) / self.scale
        return center, per


def evaluate_policy(policy: Policy | str, family: StarFamily, trials: int, seed: int = 0,
                    ) -> PolicyOutcome:
    """Monte-Carlo evaluation; trial ``k`` draws from ``default_rng([seed, k])``."""
    if isinstance(policy, str):
        policy = Policy.parse(policy)
    if trials < 1:
        raise ValueError("need at least one trial")
    f, r, m = family.f, family.radius, family.m
    runner = None
    if policy.kind == "dp-solver":
        runner = _StarTreeRunner(family, policy.epsilon or family.epsilon, policy.lam)
    costs, opts = np.zeros(trials), np.zeros(trials)
    sums = {1: 0.0, m: 0.0}
    counts = {1: 0, m: 0}
    for k in range(trials):
        rng = np.random.default_rng([seed, k])
        clients = sample_client_vector(family, rng)
        leaves = clients[1:]
        if policy.kind == "open-all":
            center, per = f, np.full(family.n, f)
        elif policy.kind == "open-none":
            center, per = f, leaves * r
        elif policy.kind == "threshold":
            k_thr = policy.threshold or m
            center, per = f, np.where(leaves >= k_thr, f, leaves * r)
        elif policy.kind == "dp-solver":
            center, per = runner.per_leaf_costs(clients, rng)
        else:
            raise ValueError(f"unknown policy {policy.kind!r}")
        costs[k] = center + math.fsum(per)
        opts[k] = harness_opt(clients, family)
        for val in (1, m):
            sel = leaves == val
            sums[val] += float(per[sel].sum())
            counts[val] += int(sel.sum())
    c1 = sums[1] / counts[1] if counts[1] else math.nan
    cm = sums[m] / counts[m] if counts[m] else math.nan
    s = math.sqrt(m)
    lhs = (s / (s + 1)) * c1 + (1 / (s + 1)) * cm
    return PolicyOutcome(costs, opts, lhs, c1, cm)
