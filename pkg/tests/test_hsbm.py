import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dphc.blocks import block_pair_weights
from dphc.errors import ParameterError, ShapeError
from dphc.hsbm import (GroundTruthTree, block_separation, edge_probability, expectation_matrix, expectation_stats,
                       experiment_model, gamma_of, largest_remainder, planted_partition, sample_graph)
from dphc.privacy import make_rng

from conftest import block_models


def four_block(f_root=0.1, f_mid=(0.4, 0.5), f_leaf=0.9, size=5):
    blocks = [np.arange(i * size, (i + 1) * size) for i in range(4)]
    return GroundTruthTree.from_nested(blocks, [[0, 1], [2, 3]],
                                       {0: f_leaf, 1: f_leaf, 2: f_leaf, 3: f_leaf,
                                        4: f_mid[0], 5: f_mid[1], 6: f_root})


def test_edge_probability_examples():
    M1 = planted_partition([6], 0.3, 0.0)
    assert all(edge_probability(M1, 0, v) == 0.3 for v in range(1, 6))
    M2 = planted_partition([3, 3], 0.8, 0.2)
    assert edge_probability(M2, 0, 4) == 0.2
    M4 = four_block()
    # blocks 0 and 1 are siblings under the first middle node
    assert edge_probability(M4, 0, 6) == 0.4
    assert edge_probability(M4, 11, 16) == 0.5
    assert edge_probability(M4, 0, 16) == 0.1
    assert edge_probability(M4, 0, 1) == 0.9
    with pytest.raises(ParameterError):
        edge_probability(M4, 2, 2)


def test_monotonicity_enforced():
    with pytest.raises(ParameterError):
        four_block(f_root=0.6)
    with pytest.raises(ParameterError):
        planted_partition([3, 3], 0.2, 0.2)


def test_bad_partition():
    with pytest.raises(ShapeError):
        GroundTruthTree([[0, 1], [1, 2]], [2, 2, -1], [0.5, 0.5, 0.1])


def test_sampling_extremes():
    blocks = [np.arange(4), np.arange(4, 8)]
    M0 = GroundTruthTree(blocks, [2, 2, -1], [0.0, 0.0, 0.0], strict=False)
    assert sample_graph(M0, make_rng(0)).m == 0
    M = GroundTruthTree(blocks, [2, 2, -1], [1.0, 1.0, 0.0])
    G = sample_graph(M, make_rng(0))
    assert G.m == 12
    assert all(M.block_of[a] == M.block_of[b] for a, b, _ in G.edges())


def test_density_k1():
    n = 2000
    G = sample_graph(planted_partition([n], 0.3, 0.0), make_rng(1))
    pairs = n * (n - 1) / 2
    assert abs(G.m - 0.3 * pairs) <= 3 * math.sqrt(pairs * 0.3 * 0.7)


def test_block_pair_densities_n1000():
    M = experiment_model(1000, 4, make_rng(2))
    G = sample_graph(M, make_rng(3))
    W = block_pair_weights(G, M.blocks)
    s = M.block_sizes
    P = M.block_probabilities()
    for i in range(4):
        for j in range(i, 4):
            pairs = s[i] * (s[i] - 1) / 2 if i == j else s[i] * s[j]
            p = P[i, j]
            assert abs(W[i, j] - p * pairs) <= 3 * math.sqrt(pairs * p * (1 - p))


def test_planted_eigenvalues_with_diagonal():
    s, k, p, q = 20, 3, 0.7, 0.2
    M = planted_partition([s] * k, p, q)
    ev = np.sort(np.linalg.eigvalsh(expectation_matrix(M, include_diagonal=True)))[::-1]
    assert ev[0] == pytest.approx(s * (p + q * (k - 1)))
    assert ev[1:k] == pytest.approx([s * (p - q)] * (k - 1))
    # the zero-diagonal matrix shifts every eigenvalue by -p
    ev0 = np.sort(np.linalg.eigvalsh(expectation_matrix(M)))[::-1]
    assert ev0[:k] == pytest.approx(ev[:k] - p)
    st_ = expectation_stats(M, include_diagonal=True)
    assert st_.sigma == pytest.approx(ev[:k]) and st_.tau == p and st_.s == s


def _direct_separation(M, include_diagonal):
    A = expectation_matrix(M, include_diagonal=include_diagonal)
    best = math.inf
    for u in range(M.n):
        for v in range(u + 1, M.n):
            if M.block_of[u] != M.block_of[v]:
                best = min(best, np.linalg.norm(A[:, u] - A[:, v]))
    return best


def test_separation_convention():
    s, p, q = 12, 0.8, 0.3
    M = planted_partition([s, s, s], p, q)
    direct = _direct_separation(M, include_diagonal=True)
    assert direct == pytest.approx((p - q) * math.sqrt(2 * s))
    assert direct != pytest.approx((p - q) * math.sqrt(s))
    assert block_separation(M, include_diagonal=True) == pytest.approx(direct)
    direct0 = _direct_separation(M, include_diagonal=False)
    assert block_separation(M) == pytest.approx(direct0)
    assert direct0 == pytest.approx(math.sqrt(2 * s * (p - q) ** 2 - 2 * (p - q) ** 2 + 2 * q**2))


def test_separation_hierarchical_matches_direct():
    M = four_block(size=4)
    assert block_separation(M) == pytest.approx(_direct_separation(M, False))
    assert block_separation(M, include_diagonal=True) == pytest.approx(_direct_separation(M, True))


def test_separation_single_block():
    assert block_separation(planted_partition([5], 0.5, 0.0)) == math.inf


def test_gamma_examples():
    M = four_block()
    assert gamma_of(M, M) == 1
    doubled = GroundTruthTree(M.blocks, M.parent, np.minimum(M.f * 2, 1.0), strict=False)
    M_small = four_block(f_root=0.05, f_mid=(0.2, 0.25), f_leaf=0.45)
    doubled = GroundTruthTree(M_small.blocks, M_small.parent, M_small.f * 2)
    assert gamma_of(M_small, doubled) == pytest.approx(2)


def test_gamma_reattached_block():
    # P = ((B0, B1), B2) vs P' = (B0, (B1, B2)), same node values a at the low merge, b at the root
    a, b = 0.6, 0.2
    blocks = [np.arange(0, 3), np.arange(3, 6), np.arange(6, 9)]
    fv = {0: 0.9, 1: 0.9, 2: 0.9, 3: a, 4: b}
    M = GroundTruthTree.from_nested(blocks, [[0, 1], 2], fv)
    M2 = GroundTruthTree.from_nested(blocks, [0, [1, 2]], fv)
    assert gamma_of(M, M2) == pytest.approx(max(a / b, b / a))


def test_gamma_zero_against_nonzero():
    blocks = [np.arange(2), np.arange(2, 4)]
    M = GroundTruthTree(blocks, [2, 2, -1], [0.5, 0.5, 0.0])
    M2 = GroundTruthTree(blocks, [2, 2, -1], [0.5, 0.5, 0.1])
    assert gamma_of(M, M2) == math.inf


def test_gamma_block_mismatch():
    with pytest.raises(ShapeError):
        gamma_of(planted_partition([2, 2], 0.5, 0.1), planted_partition([1, 3], 0.5, 0.1))


@settings(max_examples=40, deadline=None)
@given(block_models(), block_models(), st.floats(0.2, 5.0))
def test_gamma_properties(M, M2, c):
    assert gamma_of(M, M) == 1
    if M2.k == M.k:
        assert gamma_of(M, M2) == pytest.approx(gamma_of(M2, M))
    scaled = GroundTruthTree(M.blocks, M.parent, M.f * c, strict=False)
    assert gamma_of(M, scaled) == pytest.approx(max(c, 1 / c))


def _hamilton(n, weights):
    quotas = [Fraction(n) * w / sum(weights) for w in weights]
    base = [math.floor(q) for q in quotas]
    order = sorted(range(len(weights)), key=lambda i: quotas[i] - base[i], reverse=True)
    for i in order[: n - sum(base)]:
        base[i] += 1
    return base


def test_experiment_model_sizes():
    g = 3 ** (1 / 3)
    assert largest_remainder(2048, [1, g, g * g, 3]).tolist() == [272, 393, 566, 817]
    r = [Fraction(1), Fraction(14422496, 10**7), Fraction(20800838, 10**7), Fraction(3)]
    assert _hamilton(2048, r) == [272, 393, 566, 817]
    M = experiment_model(2048, 4, make_rng(0))
    assert M.block_sizes.tolist() == [272, 393, 566, 817]
    assert experiment_model(400, 2).block_sizes.tolist() == [100, 300]


def test_experiment_model_levels():
    M = experiment_model(64, 4)
    assert M.f.tolist() == pytest.approx([0.9, 0.9, 0.9, 0.9, 0.5, 0.5, 0.1])
    M8 = experiment_model(64, 8)
    assert sorted(set(np.round(M8.f, 12))) == pytest.approx([0.1, 0.1 + 0.8 / 3, 0.1 + 1.6 / 3, 0.9])
    with pytest.raises(ParameterError):
        experiment_model(64, 3)


def test_shuffle_hides_order():
    M = experiment_model(200, 4, make_rng(1))
    assert not np.array_equal(np.concatenate(M.blocks), np.arange(200))
    assert M.permutation_seed is not None


def test_json_round_trip(tmp_path):
    M = experiment_model(300, 8, make_rng(4))
    M.save(tmp_path / "m.json")
    M2 = GroundTruthTree.load(tmp_path / "m.json")
    assert gamma_of(M, M2) == 1
    assert all(np.array_equal(a, b) for a, b in zip(M.blocks, M2.blocks))
    assert "blocks" not in M.to_json()
    blocks = [np.array([0, 3]), np.array([1, 2])]
    M3 = GroundTruthTree(blocks, [2, 2, -1], [0.7, 0.7, 0.1])
    assert GroundTruthTree.from_json(M3.to_json()).blocks[0].tolist() == [0, 3]


def test_event_e_desk_check():
    n = 4096
    M = experiment_model(n, 4, make_rng(5), f_range=(0.15, 0.9))
    assert M.block_sizes.min() >= n ** (2 / 3)
    assert M.f.min() >= math.log(n) / math.sqrt(n)
    alpha = 8 / n ** (1 / 6)
    P = M.block_probabilities()
    s = M.block_sizes.astype(float)
    hits = 0
    trials = 6
    for t in range(trials):
        W = block_pair_weights(sample_graph(M, make_rng(100 + t)), M.blocks)
        iu, ju = np.triu_indices(4, 1)
        sim = W[iu, ju] / (s[iu] * s[ju])
        hits += np.all(np.abs(sim - P[iu, ju]) <= alpha * P[iu, ju])
    assert hits / trials >= 0.95
