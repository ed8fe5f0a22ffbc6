"""Privacy accounting for the noised tree algorithm.

Each vertex below level ``L'`` is marked through its own Laplace-noised count, a
sensitivity-1 query answered with scale ``b_l``, so it costs ``1 / b_l``.  One
client touches one vertex per level on its root path, hence the total is the sum
over levels.  Everything here is closed-form; sampling is only a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tree_solver import SolverParams, laplace_from_uniform, _uniform_open, laplace_scale


@dataclass(frozen=True)
class PrivacyLedger:
    per_level: tuple  # epsilon_l for l = 0 .. L'-1
    total: float
    closed_form: float
    budget: float
    per_path: float = field(default=0.0)

    @property
    def within_budget(self) -> bool:
        return self.total <= self.budget * (1 + 1e-12)


def analytic_epsilon(p: SolverParams) -> PrivacyLedger:
    L1 = p.L_prime
    eta, c = p.eta, p.c
    per_level = tuple(c * eta ** (L1 + l) / p.f for l in range(L1))
    total = math.fsum(per_level)
    closed = (c * eta ** L1 / p.f) * (eta ** L1 - 1) / (eta - 1) if L1 else 0.0
    # a client's root path crosses exactly one vertex per noised level
    per_path = math.fsum(1.0 / laplace_scale(l, p) for l in range(L1))
    ledger = PrivacyLedger(per_level, total, closed, p.epsilon, per_path)
    if not ledger.within_budget:
        raise AssertionError(f"privacy total {total} exceeds epsilon {p.epsilon}: bad parameters")
    return ledger


def laplace_cdf(x: float, b: float) -> float:
    if not b > 0:
        raise ValueError("scale must be positive")
    if x < 0:
        return 0.5 * math.exp(x / b)
    return 1.0 - 0.5 * math.exp(-x / b)


def laplace_log_tail(x: float, b: float) -> float:
    """``log Pr[X >= x]`` for ``X ~ Laplace(0, b)``, accurate in both tails."""
    if x >= 0:
        return math.log(0.5) - x / b
    return math.log1p(-0.5 * math.exp(x / b))


def laplace_log_cdf(x: float, b: float) -> float:
    return laplace_log_tail(-x, b)


def marking_prob(N: int, level: int, p: SolverParams, scale: float | None = None) -> float:
    """Exact ``Pr[(N + Lap(b)) * lam**level >= f]``; 1 at or above level ``L'``."""
    if level >= p.L_prime:
        return 1.0
    b = laplace_scale(level, p) if scale is None else scale
    threshold = p.f / p.lam ** level
    return math.exp(laplace_log_tail(threshold - N, b))


@dataclass(frozen=True)
class RatioCheck:
    level: int
    max_ratio: float
    bound: float
    worst_N: int

    @property
    def ok(self) -> bool:
        return self.max_ratio <= self.bound + 1e-9


def neighbor_ratio_check(level: int, p: SolverParams, maxN: int, scale: float | None = None,
                         ) -> RatioCheck:
    """Largest probability ratio of either marking outcome between counts ``N`` and ``N + 1``.

    ``scale`` overrides the noise scale; ``0`` models noiseless marking and yields ``inf``.
    """
    if level >= p.L_prime:
        raise ValueError(f"level {level} is not noised (L' = {p.L_prime})")
    b = laplace_scale(level, p) if scale is None else scale
    bound = math.exp(1.0 / b) if b > 0 else math.inf
    t = p.f / p.lam ** level
    worst, worst_N = 1.0, 0
    for N in range(maxN + 1):
        if b == 0:
            m0, m1 = N >= t, N + 1 >= t
            r = 1.0 if m0 == m1 else math.inf
        else:
            lm0, lm1 = laplace_log_tail(t - N, b), laplace_log_tail(t - N - 1, b)
            lu0, lu1 = laplace_log_cdf(t - N, b), laplace_log_cdf(t - N - 1, b)
            r = math.exp(max(abs(lm1 - lm0), abs(lu1 - lu0)))
        if r > worst:
            worst, worst_N = r, N
    return RatioCheck(level, worst, bound, worst_N)


def monte_carlo_marking(N: int, level: int, p: SolverParams, samples: int, rng) -> float:
    """Empirical marking frequency using the solver's own noise path."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if level >= p.L_prime:
        return 1.0
    b = laplace_scale(level, p)
    noise = laplace_from_uniform(_uniform_open(rng, samples), b)
    return float(np.mean((N + noise) * p.lam ** level >= p.f))


@dataclass
class AuditReport:
    ledger: PrivacyLedger
    ratio_checks: list
    monte_carlo: list = field(default_factory=list)  # (level, N, exact, empirical, sigma, ok)

    @property
    def checks(self) -> dict:
        out = {
            "ledger_within_budget": self.ledger.within_budget,
            "ledger_matches_closed_form": math.isclose(self.ledger.total, self.ledger.closed_form,
                                                       rel_tol=1e-12),
            "neighbor_ratios": all(c.ok for c in self.ratio_checks),
        }
        if self.monte_carlo:
            out["monte_carlo"] = all(row[-1] for row in self.monte_carlo)
        return out

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def audit(p: SolverParams, maxN: int | None = None, mc_samples: int = 0, rng=None) -> AuditReport:
    ledger = analytic_epsilon(p)
    maxN = 10 * math.ceil(p.f) if maxN is None else maxN
    checks = [neighbor_ratio_check(l, p, maxN) for l in range(p.L_prime)]
    report = AuditReport(ledger, checks)
    if mc_samples > 0 and p.L_prime > 0:
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        for level in range(p.L_prime):
            for N in (0, math.ceil(p.f / p.lam ** level)):
                exact = marking_prob(N, level, p)
                emp = monte_carlo_marking(N, level, p, mc_samples, rng)
                sigma = math.sqrt(max(exact * (1 - exact), 1e-300) / mc_samples)
                report.monte_carlo.append((level, N, exact, emp, sigma, abs(emp - exact) <= 3 * sigma))
    return report
