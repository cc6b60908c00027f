import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dphc.baselines import (beta_for_alpha, best_linkage_cost, certify_cut_approx, cut_errors, laplace_sanitize,
                            linkage_tree, sparse_cut_tree)
from dphc.dendrogram import Dendrogram, dasgupta_cost
from dphc.errors import ParameterError
from dphc.exponential import optimal_tree
from dphc.graph import WeightedGraph
from dphc.hsbm import experiment_model, sample_graph
from dphc.privacy import make_rng

from conftest import naive_cut, random_graph


def two_triangles():
    return WeightedGraph.from_edges(6, [(0, 1, 1), (1, 2, 1), (0, 2, 1), (3, 4, 1), (4, 5, 1), (3, 5, 1)])


def barbell():
    edges = [(a, b, 1.0) for a, b in itertools.combinations(range(5), 2)]
    edges += [(a + 5, b + 5, 1.0) for a, b in itertools.combinations(range(5), 2)]
    edges.append((4, 5, 1.0))
    return WeightedGraph.from_edges(10, edges)


def root_split(T):
    a, b = T.child_pair(T.root)
    return sorted(T.leaves(a).tolist()), sorted(T.leaves(b).tolist())


def test_sanitize_large_epsilon(rng):
    G = random_graph(30, rng, 0.3)
    Gs = laplace_sanitize(G, 1e6, rng)
    assert np.abs(Gs.dense() - G.dense()).max() < 1e-4


def test_sanitize_empty_graph_half_positive():
    n = 200
    Gs = laplace_sanitize(WeightedGraph.empty(n), 1.0, make_rng(0))
    pairs = n * (n - 1) / 2
    assert abs(Gs.m - pairs / 2) <= 3 * math.sqrt(pairs / 4)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10.0))
def test_sanitize_nonnegative(seed, eps):
    rng = make_rng(seed)
    Gs = laplace_sanitize(random_graph(15, rng, 0.4), eps, rng)
    assert (Gs.w > 0).all()


def test_sanitize_rejects_bad_epsilon():
    with pytest.raises(ParameterError):
        laplace_sanitize(WeightedGraph.empty(3), 0.0, make_rng(0))


def test_cut_errors_match_naive(rng):
    G = random_graph(7, rng, 0.5)
    c, c2, norm = cut_errors(G, G, 0, rng)
    assert c.size == 2**6 - 1
    codes = np.arange(1, 2**6)
    for code, val in zip(codes[:20], c[:20]):
        S = [i for i in range(7) if code >> i & 1]
        assert val == pytest.approx(naive_cut(G, S))
        assert norm[code - 1] == min(len(S), 7 - len(S))


def test_certify_identity_and_scaling(rng):
    G = random_graph(8, rng, 0.6)
    assert certify_cut_approx(G, G) == (0.0, 0.0)
    G11 = WeightedGraph(G.n, G.u, G.v, G.w * 1.1, _canonical=True)
    alpha, beta = certify_cut_approx(G, G11)
    assert alpha == pytest.approx(0.1) and beta == 0.0


def test_certify_pair_is_valid(rng):
    G = random_graph(10, rng, 0.5)
    G2 = laplace_sanitize(G, 1.0, rng)
    alpha, beta = certify_cut_approx(G, G2)
    c, c2, norm = cut_errors(G, G2, 0, rng)
    assert np.all(np.abs(c2 - c) <= alpha * c + beta * norm + 1e-9)
    assert beta == pytest.approx(beta_for_alpha(c, c2, norm, alpha))


def test_certify_beta_trend():
    means = {}
    for n in (8, 12, 16):
        vals = []
        for s in range(30):
            rng = make_rng(100 * n + s)
            G = random_graph(n, rng, 0.5, integer=True)
            c, c2, norm = cut_errors(G, laplace_sanitize(G, 1.0, rng), 0, rng)
            vals.append(beta_for_alpha(c, c2, norm, 0.0))
        means[n] = np.mean(vals)
    assert means[8] < means[12] < means[16]
    # roughly sqrt(n) up to log factors
    ratios = [means[n] / math.sqrt(n) for n in means]
    assert max(ratios) / min(ratios) < 2


def test_linkage_two_edges():
    G = WeightedGraph.from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)])
    for mode in ("single", "complete", "average"):
        T = linkage_tree(G, mode)
        firsts = {tuple(sorted(T.leaves(T.n + t).tolist())) for t in range(2)}
        assert firsts == {(0, 1), (2, 3)}


def test_linkage_path_single():
    G = WeightedGraph.from_edges(3, [(0, 1, 2.0), (1, 2, 1.0)])
    T = linkage_tree(G, "single")
    assert sorted(T.leaves(T.n).tolist()) == [0, 1]


def test_linkage_average_group_similarity():
    # after {0,1}: average links {0,1}-{2} at (w02 + w12) / 2 = 1.5, beating w(2,3) = 1.4
    G = WeightedGraph.from_edges(4, [(0, 1, 5.0), (0, 2, 2.0), (1, 2, 1.0), (2, 3, 1.4)])
    T = linkage_tree(G, "average")
    assert sorted(T.leaves(T.n + 1).tolist()) == [0, 1, 2]
    T = linkage_tree(G, "complete")
    assert sorted(T.leaves(T.n + 1).tolist()) == [2, 3]


def test_best_linkage_is_minimum():
    star = WeightedGraph.from_edges(6, [(0, i, 1.0) for i in range(1, 6)])
    T, c, mode = best_linkage_cost(star, star)
    assert c == min(dasgupta_cost(star, linkage_tree(star, m)) for m in ("single", "complete", "average"))
    assert dasgupta_cost(star, T) == c and mode in ("single", "complete", "average")
    G = random_graph(20, make_rng(1), 0.3)
    Gs1 = laplace_sanitize(G, 1.0, make_rng(2))
    Gs2 = laplace_sanitize(G, 1.0, make_rng(2))
    assert best_linkage_cost(G, Gs1)[0] == best_linkage_cost(G, Gs2)[0]


def test_sparse_cut_examples():
    assert root_split(sparse_cut_tree(two_triangles())) in (([0, 1, 2], [3, 4, 5]), ([3, 4, 5], [0, 1, 2]))
    T = sparse_cut_tree(WeightedGraph.from_edges(2, [(0, 1, 1.0)]))
    assert T == Dendrogram.from_nested([0, 1])
    assert sparse_cut_tree(WeightedGraph.empty(1)).n == 1


def test_sparse_cut_barbell_matches_enumeration():
    G = barbell()
    best, best_sets = math.inf, []
    for r in range(1, 10):
        for S in itertools.combinations(range(10), r):
            val = naive_cut(G, S) / (r * (10 - r))
            if val < best - 1e-12:
                best, best_sets = val, [set(S)]
            elif abs(val - best) <= 1e-12:
                best_sets.append(set(S))
    assert {0, 1, 2, 3, 4} in best_sets
    a, _ = root_split(sparse_cut_tree(G))
    assert set(a) in best_sets


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_trees_are_valid(n, seed, density):
    rng = make_rng(seed)
    G = random_graph(n, rng, density)
    for T in (sparse_cut_tree(G), linkage_tree(G, "single"), linkage_tree(G, "average")):
        assert T.n == n and sorted(T.leaves(T.root).tolist()) == list(range(n))


@pytest.mark.parametrize("seed", range(6))
def test_cut_approx_cost_transfer(seed):
    rng = make_rng(seed)
    n = 9
    G = random_graph(n, rng, 0.5, integer=True)
    G2 = laplace_sanitize(G, 1.0, rng)
    alpha, beta = certify_cut_approx(G, G2)
    assert alpha < 1
    opt_G = optimal_tree(G)[1]
    opt_G2 = optimal_tree(G2)[1]
    for T in (sparse_cut_tree(G2), linkage_tree(G2, "average"), linkage_tree(G2, "single")):
        a = dasgupta_cost(G2, T) / opt_G2
        assert dasgupta_cost(G, T) <= (1 + 2 * alpha) * a * opt_G + (4 * a + 2) * beta * n**2


def test_linkage_worse_than_sparse_cut_on_hsbm():
    M = experiment_model(512, 4, make_rng(0))
    G = sample_graph(M, make_rng(1))
    Gs = laplace_sanitize(G, 2.0, make_rng(2))
    _, linkage_cost, _ = best_linkage_cost(G, Gs)
    assert linkage_cost > dasgupta_cost(G, sparse_cut_tree(Gs))
