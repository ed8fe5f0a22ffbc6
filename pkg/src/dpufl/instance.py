"""UFL instances, metric validation and the facility + connection cost model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

import numpy as np

TRIANGLE_TOL = 1e-9

DistanceLike = Union[np.ndarray, Callable[[int, int], float], None]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Metric:
    """Finite metric given by a dense ``n x n`` distance table."""

    dist: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dist", _frozen(np.asarray(self.dist, dtype=float)))

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def diameter(self) -> float:
        return float(self.dist.max()) if self.dist.size else 0.0

    @classmethod
    def from_coords(cls, coords) -> "Metric":
        x = np.asarray(coords, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        diff = x[:, None, :] - x[None, :, :]
        return cls(np.sqrt((diff ** 2).sum(axis=-1)))

    def __eq__(self, other):
        if not isinstance(other, Metric):
            return NotImplemented
        return np.array_equal(self.dist, other.dist)

    __hash__ = None


@dataclass(frozen=True)
class Violation:
    kind: str  # "shape", "diagonal", "negative", "symmetry", "triangle", "nonfinite"
    where: tuple
    detail: str = ""


def validate_metric(m: Metric | np.ndarray, limit: int = 100) -> list[Violation]:
    """Return the list of metric-axiom violations (empty for a valid metric).

    Triangle violations ``(i, j, k)`` mean ``d(i, k) > d(i, j) + d(j, k) + 1e-9``.
    At most ``limit`` violations of each kind are reported.
    """
    d = m.dist if isinstance(m, Metric) else np.asarray(m, dtype=float)
    out: list[Violation] = []
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        return [Violation("shape", tuple(d.shape), "distance table is not square")]
    n = d.shape[0]
    bad = np.argwhere(~np.isfinite(d))
    if len(bad):
        return [Violation("nonfinite", tuple(map(int, ij))) for ij in bad[:limit]]

    for i in np.flatnonzero(np.diag(d) != 0)[:limit]:
        out.append(Violation("diagonal", (int(i),), f"d[{i}][{i}] = {d[i, i]!r}"))
    for i, j in np.argwhere(d < 0)[:limit]:
        out.append(Violation("negative", (int(i), int(j))))
    for i, j in np.argwhere(np.triu(d != d.T, 1))[:limit]:
        out.append(Violation("symmetry", (int(i), int(j)), f"{d[i, j]!r} != {d[j, i]!r}"))

    found = 0
    for j in range(n):
        # d[i, k] > d[i, j] + d[j, k]
        mask = d > d[:, j][:, None] + d[j, :][None, :] + TRIANGLE_TOL
        if mask.any():
            for i, k in np.argwhere(mask):
                out.append(Violation("triangle", (int(i), j, int(k)),
                                     f"d[{i}][{k}] > d[{i}][{j}] + d[{j}][{k}]"))
                found += 1
                if found >= limit:
                    return out
    return out


@dataclass(frozen=True, eq=False)
class UflInstance:
    """Locations with a metric, one uniform opening cost and client counts per location."""

    metric: Metric
    facility_cost: float
    clients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.clients)
        if c.ndim != 1:
            raise ValueError("clients must be a flat vector")
        if c.size and not np.issubdtype(c.dtype, np.integer) and not np.all(c == np.round(c)):
            raise ValueError("clients must be integers")
        c = _frozen(c.astype(np.int64))
        object.__setattr__(self, "clients", c)
        if not self.facility_cost > 0:
            raise ValueError("facility_cost must be positive")
        if c.shape[0] != self.metric.n:
            raise ValueError(f"clients has length {c.shape[0]}, expected n = {self.metric.n}")
        if (c < 0).any():
            raise ValueError("clients must be nonnegative")

    @property
    def n(self) -> int:
        return self.metric.n

    @property
    def total_clients(self) -> int:
        return int(self.clients.sum())

    def with_clients(self, clients) -> "UflInstance":
        return UflInstance(self.metric, self.facility_cost, np.asarray(clients))

    def __eq__(self, other):
        if not isinstance(other, UflInstance):
            return NotImplemented
        return (self.metric == other.metric
                and self.facility_cost == other.facility_cost
                and np.array_equal(self.clients, other.clients))

    __hash__ = None


@dataclass(frozen=True)
class CostBreakdown:
    facility: float
    connection: float

    @property
    def total(self) -> float:
        return self.facility + self.connection

    def scaled(self, factor: float) -> "CostBreakdown":
        return CostBreakdown(self.facility * factor, self.connection * factor)


def _as_callable(d: DistanceLike, inst: UflInstance) -> Callable[[int, int], float]:
    if d is None:
        table = inst.metric.dist
        return lambda v, s: float(table[v, s])
    if isinstance(d, np.ndarray):
        return lambda v, s: float(d[v, s])
    return d


def nearest_in_set(d: DistanceLike | Metric, v: int, R: Iterable[int]) -> int:
    """Closest member of ``R`` to ``v``; ties go to the smallest id."""
    R = sorted(R)
    if not R:
        raise ValueError("nearest_in_set: empty candidate set")
    if isinstance(d, Metric):
        d = d.dist
    dist = (lambda s: float(d[v, s])) if isinstance(d, np.ndarray) else (lambda s: d(v, s))
    best, best_d = R[0], dist(R[0])
    for s in R[1:]:
        ds = dist(s)
        if ds < best_d:
            best, best_d = s, ds
    return best


def eval_cost(inst: UflInstance, open_set: Iterable[int], d: DistanceLike = None) -> CostBreakdown:
    """Facility cost ``|S| f`` plus connection cost ``sum_v N_v min_{s in S} d(v, s)``.

    ``d`` defaults to the instance metric.  It may also be a table or a callable
    ``d(point, facility)``, e.g. a tree metric where facilities are tree vertices.
    """
    S = sorted(set(open_set))
    if not S:
        if inst.total_clients > 0:
            raise ValueError("no facility reachable: empty open set with clients present")
        return CostBreakdown(0.0, 0.0)
    if d is None or isinstance(d, np.ndarray):
        table = inst.metric.dist if d is None else d
        nz = np.flatnonzero(inst.clients)
        mins = table[np.ix_(nz, S)].min(axis=1) if len(nz) else np.zeros(0)
        connection = float(np.dot(inst.clients[nz].astype(float), mins))
    else:
        connection = 0.0
        for v in np.flatnonzero(inst.clients):
            connection += float(inst.clients[v]) * min(d(int(v), s) for s in S)
    return CostBreakdown(len(S) * inst.facility_cost, connection)


def assignment_cost(inst: UflInstance, assignment: Sequence[int], d: DistanceLike = None,
                    ) -> CostBreakdown:
    """Cost of an explicit client-to-facility assignment (``-1`` for empty locations)."""
    dist = _as_callable(d, inst)
    used = {a for v, a in enumerate(assignment) if inst.clients[v] > 0}
    if -1 in used:
        raise ValueError("location with clients has no assigned facility")
    connection = sum(float(inst.clients[v]) * dist(v, a)
                     for v, a in enumerate(assignment) if inst.clients[v] > 0)
    return CostBreakdown(len(used) * inst.facility_cost, connection)
