import numpy as np
import pytest

from dpufl.generators import dyadic, random_clients, random_hst
from dpufl.hst import HstTree
from dpufl.instance import Metric, UflInstance
from dpufl.tree_solver import SolverParams


def w_tree() -> HstTree:
    """Depth-2 tree: root 0, middles 1 and 2, leaves 3,4 under 1 and 5,6 under 2."""
    return HstTree(1.5, 2, [2, 1, 1, 0, 0, 0, 0], [-1, 0, 0, 1, 1, 2, 2], [-1, -1, -1, 0, 1, 2, 3])


W_CLIENTS = np.array([1, 0, 5, 0])
W_F = 2.25


@pytest.fixture
def wt():
    return w_tree()


@pytest.fixture
def w_inst():
    t = w_tree()
    return UflInstance(Metric(t.point_distance_table()), W_F, W_CLIENTS)


@pytest.fixture
def params_p():
    return SolverParams(1.0, 10.0, 1.96)


def tree_corpus(count: int, seed: int, max_n: int = 12, max_depth: int = 5, lam: float = 1.5,
                epsilons=(0.5, 1.0, 2.0)):
    """Random HST instances with dyadic facility costs, so every tree cost is exact in floats."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(1, max_n + 1))
        depth = int(rng.integers(1, max_depth + 1))
        t = random_hst(rng, n, depth, lam)
        clients = random_clients(rng, n)
        f = dyadic(rng, 0.25, 12.0)
        eps = float(rng.choice(epsilons))
        out.append((t, clients, f, eps))
    return out
