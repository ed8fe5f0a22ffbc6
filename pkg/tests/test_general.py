import math

import numpy as np

from dpufl.general import solve_general, solve_general_base
from dpufl.generators import random_euclidean
from dpufl.instance import Metric, UflInstance, eval_cost
from dpufl.oracle import opt_exhaustive


def test_single_point():
    inst = UflInstance(Metric([[0.0]]), 2.5, np.array([1]))
    for run in (solve_general, solve_general_base):
        g = run(inst, 1.0, seed=3)
        assert g.open == {0} and g.cost_in_original.total == 2.5


def test_all_points_coincide():
    inst = UflInstance(Metric(np.zeros((3, 3))), 1.0, np.array([1, 2, 0]))
    g = solve_general(inst, 1.0, seed=1)
    assert g.cost_in_original.total == 1.0 and g.open == {0}


def test_two_point_cheap_facilities():
    inst = UflInstance(Metric([[0, 1], [1, 0]]), 0.1, np.array([1, 1]))
    opt = opt_exhaustive(inst).opt_cost
    assert math.isclose(opt, 0.2)
    costs = [solve_general(inst, 1.0, seed=s).cost_in_original.total for s in range(100)]
    assert np.mean(costs) <= 50 * (math.log2(2) + 1) * opt


def test_cost_views_and_invariants():
    for k in range(30):
        inst = random_euclidean(np.random.default_rng(k), 10)
        g = solve_general(inst, 1.0, seed=k)
        assert g.cost_in_original.connection <= g.cost_in_tree.connection + 1e-9
        assert g.cost_in_original.facility == g.cost_in_tree.facility
        assert g.open <= g.superset
        # the reported assignment is a genuine solution of the original instance
        conn = sum(inst.clients[p] * inst.metric.dist[p, q] for p, q in enumerate(g.assignment) if q >= 0)
        assert math.isclose(conn, g.cost_in_original.connection, rel_tol=1e-12, abs_tol=1e-12)
        assert g.cost_in_original.total >= eval_cost(inst, g.open).total - 1e-9
        assert all((q >= 0) == (inst.clients[p] > 0) for p, q in enumerate(g.assignment))


def test_seed_roles():
    inst = random_euclidean(np.random.default_rng(3), 9)
    a = solve_general(inst, 1.0, seed=5)
    b = solve_general(inst, 1.0, seed=5)
    assert a.open == b.open and a.embedding.tree == b.embedding.tree
    c = solve_general(inst, 1.0, seed=6, tree_seed=5)
    assert c.embedding.tree == a.embedding.tree  # tree pinned, noise differs
    base1 = solve_general_base(inst, 1.0, seed=5)
    base2 = solve_general_base(inst, 1.0, seed=5)
    assert base1.open == base2.open and base1.cost_in_original == base2.cost_in_original


def test_ratio_base_versus_private_recorded():
    inst = random_euclidean(np.random.default_rng(12), 10)
    opt = opt_exhaustive(inst).opt_cost
    base = np.mean([solve_general_base(inst, 1.0, seed=s).cost_in_original.total for s in range(60)]) / opt
    dp = np.mean([solve_general(inst, 1.0, seed=s).cost_in_original.total for s in range(60)]) / opt
    print(f"base ratio {base:.3f}, private ratio {dp:.3f}")
    assert base >= 1 - 1e-12 and dp >= 1 - 1e-12
