import math

import numpy as np
import pytest

from epictrl import (
    ValidationError,
    component_of,
    edge_removal,
    min_sbcc,
    min_sbcc_exact,
    solve_karger,
    sparsification_regime,
)
from epictrl.network import boundary_of
from epictrl.percolate import sample_keep_matrix

from conftest import (
    complete_network,
    make_network,
    path_network,
    star_network,
    random_connected_network,
)


# ------------------------------------------------------------- min_sbcc

def test_sbcc_star_contract():
    star = star_network(4)
    sol = min_sbcc(star, budget=2.0, lam=0.5)
    assert sol.within_budget
    assert sol.cut_size <= 2.0 / 0.5
    exact_set, exact_size = min_sbcc_exact(star, None, 2.0)
    assert exact_size == 3
    assert sol.component_size <= math.ceil(exact_size / (1 - 0.5))


def test_sbcc_budget_at_source_degree_isolates():
    star = star_network(4)
    sol = min_sbcc(star, budget=4.0, lam=0.5)
    assert sol.component_size == 1 and sol.component == (0,)
    assert sol.cut_size == 4


def test_sbcc_zero_budget_returns_whole_component():
    net = path_network()
    sol = min_sbcc(net, budget=0.0, lam=0.9)
    assert sol.within_budget
    assert sol.cut_size == 0
    assert sol.component_size == 3


def test_sbcc_cut_edges_are_exact_boundary():
    net = make_network(6, [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4), (4, 5)])
    for budget in (0.0, 1.0, 2.0, 4.0):
        sol = min_sbcc(net, budget=budget, lam=0.5)
        assert sol.cut_edges == boundary_of(net, sol.component)
        assert 0 in sol.component
        assert sol.cut_size == len(sol.cut_edges)


def test_sbcc_lambda_validation():
    with pytest.raises(ValidationError):
        min_sbcc(path_network(), budget=1.0, lam=0.0)
    with pytest.raises(ValidationError):
        min_sbcc(path_network(), budget=1.0, lam=1.0)


def test_sbcc_requires_unit_capacities():
    net = make_network(3, [(0, 1), (1, 2)], costs=[2.0, 1.0])
    with pytest.raises(ValidationError, match="unit"):
        min_sbcc(net, budget=1.0, lam=0.5)


# ------------------------------------------------------------- exact oracle

def test_exact_star_budget_two():
    assert min_sbcc_exact(star_network(4), None, 2.0) == ((0, 1), 3)


def test_exact_path_budget_one():
    assert min_sbcc_exact(path_network(), None, 1.0) == ((0,), 1)


def test_exact_triangle_budget_one():
    tri = complete_network(3)
    assert min_sbcc_exact(tri, None, 1.0)[1] == 3


def test_exact_cap():
    from epictrl import InstanceTooLargeError

    big = complete_network(7)  # 21 edges
    with pytest.raises(InstanceTooLargeError):
        min_sbcc_exact(big, None, 2.0)


def test_contract_against_oracle_grid(rng):
    for _ in range(10):
        net = random_connected_network(rng, n_lo=4, n_hi=7, max_m=16, p_mode=1.0)
        for lam in (0.25, 0.5, 0.75):
            for budget in (1.0, 2.0, 3.0):
                sol = min_sbcc(net, budget=budget, lam=lam)
                assert sol.cut_size <= budget / lam or not sol.within_budget
                if sol.within_budget:
                    _, exact = min_sbcc_exact(net, None, budget)
                    cap = math.ceil(exact / (1.0 - lam))
                    assert sol.component_size <= cap, (lam, budget)


# ------------------------------------------------------------- solve_karger

def test_karger_p_one_reduces_to_plain_sbcc():
    net = path_network(p=1.0)
    iv, report = solve_karger(net, budget=1.0, p=1.0, gamma=4.0, lam=0.5,
                              repetitions=2, eval_samples=50, seed=0)
    assert iv.members == (0,)
    chosen = report["candidates"][report["chosen_index"]]
    assert chosen["mc_mean"] == 1.0
    # with the full graph sampled, the returned barrier is the sample cut
    assert chosen["members"] == [0]


def test_karger_path_best_candidate():
    net = path_network(p=0.6)
    iv, report = solve_karger(net, budget=1.0, p=0.6, gamma=4.0, lam=0.5,
                              repetitions=6, eval_samples=200, seed=3)
    assert iv.members == (0,)
    assert report["cost"] == 1.0


def test_karger_reconstruction_consistency():
    rng = np.random.default_rng(11)
    for _ in range(5):
        net = random_connected_network(rng, n_lo=5, n_hi=8, max_m=12, p_mode=0.7)
        iv, report = solve_karger(net, budget=2.0, p=0.7, gamma=4.0, lam=0.5,
                                  repetitions=4, eval_samples=20,
                                  seed=int(rng.integers(1 << 30)))
        for cand in report["candidates"]:
            members = component_of(net, edge_removal(net, cand["members"])).members
            assert list(members) == cand["component_members"]
            assert boundary_of(net, members) == tuple(cand["members"])


def test_karger_validation():
    nonuniform = make_network(3, [(0, 1), (1, 2)], probs=[0.5, 0.6])
    with pytest.raises(ValidationError):
        solve_karger(nonuniform, budget=1.0, p=0.5)
    weighted = make_network(3, [(0, 1), (1, 2)], probs=0.5, costs=[2.0, 1.0])
    with pytest.raises(ValidationError, match="unit"):
        solve_karger(weighted, budget=1.0, p=0.5)
    with pytest.raises(ValidationError, match="gamma"):
        solve_karger(path_network(p=0.5), budget=1.0, p=0.5, gamma=2.0)


def test_karger_out_of_regime_flagged():
    net = path_network(p=0.5)
    _, report = solve_karger(net, budget=1.0, p=0.5, repetitions=2,
                             eval_samples=20, seed=0)
    assert not report["in_regime"]
    assert report["regime_note"].startswith("out-of-regime")


def test_karger_deterministic():
    net = complete_network(8, p=0.8)
    _, a = solve_karger(net, budget=3.0, p=0.8, repetitions=3,
                        eval_samples=100, seed=7)
    _, b = solve_karger(net, budget=3.0, p=0.8, repetitions=3,
                        eval_samples=100, seed=7)
    assert a == b


def test_cut_sampling_concentration_smoke():
    # sampled cut sizes concentrate around p * |F| inside the regime
    n, p = 40, 0.9
    net = complete_network(n, p=p)
    regime = sparsification_regime(net, p, d=1.0)
    assert regime.in_regime
    eps = regime.epsilon
    rng = np.random.default_rng(1)
    cuts = []
    for _ in range(20):
        side = {0} | {int(v) for v in rng.choice(np.arange(1, n), size=rng.integers(1, n - 1),
                                                 replace=False)}
        cuts.append(np.array([(net.us[e] in side) != (net.vs[e] in side)
                              for e in range(net.m)]))
    cuts.append(np.array([bool((net.us[e] == 0) ^ (net.vs[e] == 0))
                          for e in range(net.m)]))  # a minimum cut
    keep = sample_keep_matrix(net, 123, 0, 30)
    good = 0
    total = 0
    for cut in cuts:
        f_size = int(cut.sum())
        sampled = keep[:, cut].sum(axis=1)
        ok = np.abs(sampled - p * f_size) <= eps * p * f_size
        good += int(ok.sum())
        total += len(ok)
    assert good / total >= 0.95
