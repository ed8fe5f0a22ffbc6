import math

import numpy as np
import pytest

from dpufl.generators import random_clients, random_hst
from dpufl.instance import Metric, UflInstance, eval_cost
from dpufl.oracle import approx_ratio, opt_exhaustive, opt_tree_dp

from conftest import W_CLIENTS, W_F, tree_corpus


def test_w_on_leaves(w_inst):
    r = opt_exhaustive(w_inst)
    assert r.opt_cost == 4.5 and r.opt_set == {0, 2}
    assert eval_cost(w_inst, r.opt_set).total == 4.5


def test_w_over_all_vertices(wt, w_inst):
    leaf = opt_tree_dp(wt, W_CLIENTS, W_F, leaves_only=True)
    anywhere = opt_tree_dp(wt, W_CLIENTS, W_F)
    assert leaf.opt_cost == anywhere.opt_cost == 4.5
    ex = opt_exhaustive(w_inst, d=wt, candidates="all")
    assert ex.opt_cost == 4.5 and ex.opt_set == {3, 5}


def test_zero_clients():
    inst = UflInstance(Metric([[0, 1], [1, 0]]), 1.0, np.array([0, 0]))
    r = opt_exhaustive(inst)
    assert r.opt_cost == 0 and r.opt_set == set()


def test_tiny_f_opens_every_client_location():
    d = Metric.from_coords(np.array([[0.0], [1.0], [3.0], [7.0]]))
    inst = UflInstance(d, 1e-6, np.array([2, 0, 1, 4]))
    assert opt_exhaustive(inst).opt_set == {0, 2, 3}


def test_single_leaf_must_open():
    inst = UflInstance(Metric([[0.0]]), 3.0, np.array([1]))
    assert opt_exhaustive(inst).opt_cost == 3.0


def test_lexicographic_tie_break():
    inst = UflInstance(Metric([[0, 1], [1, 0]]), 1.0, np.array([1, 0]))
    inst2 = UflInstance(Metric([[0, 2], [2, 0]]), 2.0, np.array([1, 1]))
    assert opt_exhaustive(inst).opt_set == {0}
    # {0}: 2 + 2 = 4, {1}: 4, {0,1}: 4 -> smallest sorted tuple
    assert opt_exhaustive(inst2).opt_set == {0}


def test_too_many_candidates():
    inst = UflInstance(Metric(np.zeros((21, 21))), 1.0, np.ones(21, dtype=int))
    with pytest.raises(ValueError, match="opt_tree_dp"):
        opt_exhaustive(inst)


def test_dp_matches_exhaustive_over_all_vertices():
    rng = np.random.default_rng(8)
    checked = 0
    while checked < 150:
        n = int(rng.integers(1, 8))
        t = random_hst(rng, n, int(rng.integers(1, 4)))
        if t.n_vertices > 16:
            continue
        clients = random_clients(rng, n)
        f = float(rng.integers(1, 40)) / 8
        inst = UflInstance(Metric(np.zeros((n, n))), f, clients)  # metric replaced by the tree
        ex = opt_exhaustive(inst, d=t, candidates="all")
        dp = opt_tree_dp(t, clients, f)
        assert dp.opt_cost == ex.opt_cost
        checked += 1


def test_internal_vertices_never_hurt():
    for t, clients, f, _ in tree_corpus(100, 4, max_n=10):
        assert opt_tree_dp(t, clients, f).opt_cost <= opt_tree_dp(t, clients, f, leaves_only=True).opt_cost


def test_internal_vertex_can_win():
    # three loaded leaves under one parent: opening the parent beats every leaf choice
    from dpufl.hst import HstTree
    t = HstTree(1.5, 2, [2, 1, 0, 0, 0], [-1, 0, 1, 1, 1], [-1, -1, 0, 1, 2])
    clients = [1, 1, 1]
    assert opt_tree_dp(t, clients, 2.0).opt_cost < opt_tree_dp(t, clients, 2.0, leaves_only=True).opt_cost


def test_opt_set_achieves_cost():
    for t, clients, f, _ in tree_corpus(60, 5, max_n=10):
        r = opt_tree_dp(t, clients, f)
        if not r.opt_set:
            assert r.opt_cost == 0
            continue
        conn = sum(n * min(t.point_distance(p, s) for s in r.opt_set) for p, n in enumerate(clients) if n)
        assert math.isclose(len(r.opt_set) * f + conn, r.opt_cost, rel_tol=1e-12)


def test_monotone_in_f_and_clients():
    for t, clients, f, _ in tree_corpus(40, 6, max_n=10):
        base = opt_tree_dp(t, clients, f).opt_cost
        assert opt_tree_dp(t, clients, f / 2).opt_cost <= base
        fewer = np.maximum(np.asarray(clients) - 1, 0)
        assert opt_tree_dp(t, fewer, f).opt_cost <= base


class TestRatio:
    def test_w(self):
        assert approx_ratio(7.25, 4.5) == pytest.approx(1.6111, abs=1e-4)

    def test_zero_over_zero(self):
        assert approx_ratio(0, 0) == 1

    def test_infinite(self):
        assert math.isinf(approx_ratio(5, 0))

    def test_negative(self):
        with pytest.raises(ValueError):
            approx_ratio(-1, 2)
