"""Pentagon-partition graphs and desk-scale checks of the lower-bound ingredients.

A graph in the family is ``n/5`` disjoint unit 5-cycles.  A tree whose
balanced cut splits an ``alpha`` fraction of the cycles pays at least
``(4 alpha / 15) n^2``; :func:`verify_miss_cost_bound` checks that inequality
verbatim.  :func:`packing_experiment` probes how well one balanced cut can
serve two independently drawn graphs at once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .dendrogram import (BalancedCut, Dendrogram, MergeBuilder, balanced_cut_of_tree, dasgupta_cost,
                         random_merges, random_tree)
from .errors import ParameterError, SizeLimitError
from .exponential import optimal_tree
from .graph import WeightedGraph

PACKING_LIMIT = 25


@dataclass(frozen=True)
class PentagonGraph:
    graph: WeightedGraph
    cycles: tuple  # of length-5 int arrays, in cycle order

    @property
    def n(self) -> int:
        return self.graph.n

    def cycle_of(self) -> np.ndarray:
        lab = np.empty(self.n, dtype=np.int64)
        for i, c in enumerate(self.cycles):
            lab[c] = i
        return lab


def pentagon_from_cycles(n: int, cycles) -> PentagonGraph:
    cycles = tuple(np.asarray(c, dtype=np.int64) for c in cycles)
    if any(c.size != 5 for c in cycles):
        raise ParameterError("every cycle needs exactly 5 vertices")
    allv = np.concatenate(cycles) if cycles else np.zeros(0, dtype=np.int64)
    if allv.size != n or np.unique(allv).size != n:
        raise ParameterError("cycles must partition the vertex set")
    edges = [(int(c[i]), int(c[(i + 1) % 5]), 1.0) for c in cycles for i in range(5)]
    return PentagonGraph(WeightedGraph.from_edges(n, edges), cycles)


def sample_pentagon_graph(n: int, rng: np.random.Generator) -> PentagonGraph:
    """Uniformly random partition into 5-sets (one shuffle), each wired as a cycle."""
    if n <= 0 or n % 5:
        raise ParameterError(f"n must be a positive multiple of 5, got {n}")
    perm = rng.permutation(n)
    return pentagon_from_cycles(n, perm.reshape(-1, 5))


@lru_cache(maxsize=1)
def _c5_optimum():
    C5 = WeightedGraph.from_edges(5, [(i, (i + 1) % 5, 1.0) for i in range(5)])
    return optimal_tree(C5)


def c5_optimal_cost() -> float:
    """Exact optimum cost of the unit 5-cycle (exhaustive search)."""
    return _c5_optimum()[1]


def _graft(builder: MergeBuilder, T: Dendrogram, labels) -> int:
    ids = list(labels)
    node = list(ids)
    for t in range(T.n - 1):
        a, b = T.child_pair(T.n + t)
        node.append(builder.merge(node[a], node[b]))
    return node[-1]


def cycle_respecting_tree(PG: PentagonGraph, rng: np.random.Generator | None = None) -> Dendrogram:
    """An optimal C5 tree on every cycle, cycles joined at random (or left to right)."""
    T5, _ = _c5_optimum()
    builder = MergeBuilder(PG.n)
    roots = [_graft(builder, T5, c) for c in PG.cycles]
    if rng is None:
        acc = roots[0]
        for r in roots[1:]:
            acc = builder.merge(acc, r)
    else:
        random_merges(builder, roots, rng)
    return builder.build()


def splitting_tree(PG: PentagonGraph, rng: np.random.Generator) -> Dendrogram:
    """A tree whose balanced cut splits every cycle.

    The root separates two vertices of each cycle from the other three, so
    the heavy side (``3n/5 < 2n/3`` leaves) is the cut and misses every cycle.
    """
    builder = MergeBuilder(PG.n)
    left = np.concatenate([c[:2] for c in PG.cycles])
    right = np.concatenate([c[2:] for c in PG.cycles])
    a = random_merges(builder, left, rng)
    b = random_merges(builder, right, rng)
    builder.merge(a, b)
    return builder.build()


def count_missed_cycles(PG: PentagonGraph, cut: BalancedCut) -> int:
    """Cycles with at least one vertex on each side of the cut."""
    A = np.asarray(cut.A, dtype=bool)
    inside = np.array([A[c].sum() for c in PG.cycles])
    return int(np.sum((inside > 0) & (inside < 5)))


@dataclass(frozen=True)
class MissCostReport:
    alpha: float
    cost: float
    bound: float
    passed: bool

    @property
    def slack(self) -> float:
        return self.cost - self.bound


def verify_miss_cost_bound(PG: PentagonGraph, T: Dendrogram) -> MissCostReport:
    """Check ``cost >= (4 alpha / 15) n^2`` where ``alpha`` is the missed-cycle fraction."""
    cut = balanced_cut_of_tree(T)
    alpha = count_missed_cycles(PG, cut) / (PG.n / 5)
    cost = dasgupta_cost(PG.graph, T)
    bound = 4.0 * alpha / 15.0 * PG.n**2
    return MissCostReport(alpha, cost, bound, bool(cost >= bound))


# -- two-graph packing probe ---------------------------------------------------


def _popcount32(x: np.ndarray) -> np.ndarray:
    x = x - ((x >> 1) & 0x55555555)
    x = (x & 0x33333333) + ((x >> 2) & 0x33333333)
    x = (x + (x >> 4)) & 0x0F0F0F0F
    return (x * 0x01010101 & 0xFFFFFFFF) >> 24


def _cycle_bits(PG: PentagonGraph) -> list[int]:
    return [int(sum(1 << int(v) for v in c)) for c in PG.cycles]


def min_joint_miss(G1: PentagonGraph, G2: PentagonGraph, chunk: int = 1 << 21) -> int:
    """Exhaustive ``min over balanced cuts of max(missed in G1, missed in G2)``."""
    n = G1.n
    if G2.n != n:
        raise ParameterError("graphs must share the vertex set")
    if n > PACKING_LIMIT:
        raise SizeLimitError(f"exhaustive balanced cuts are limited to n <= {PACKING_LIMIT}")
    bits1, bits2 = _cycle_bits(G1), _cycle_bits(G2)
    lo, hi = n / 3.0, 2.0 * n / 3.0
    best = n
    # vertex n-1 stays on the B side, so every unordered cut is seen once
    total = 1 << (n - 1)
    for start in range(0, total, chunk):
        masks = np.arange(start, min(start + chunk, total), dtype=np.int64)
        size = _popcount32(masks)
        masks = masks[(size >= lo) & (size <= hi)]
        if masks.size == 0:
            continue
        m1 = np.zeros(masks.size, dtype=np.int64)
        m2 = np.zeros(masks.size, dtype=np.int64)
        for bits, acc in ((bits1, m1), (bits2, m2)):
            for c in bits:
                part = masks & c
                acc += (part != 0) & (part != c)
        best = min(best, int(np.maximum(m1, m2).min()))
    return best


def packing_experiment(n: int, pairs: int, rng: np.random.Generator, *, trees_per_graph: int = 4) -> dict:
    """Distribution of the best joint balanced-cut miss over sampled graph pairs.

    Every sampled graph also gets miss-cost checks on random, splitting and
    cycle-respecting trees; ``miss_bound_violations`` counts failures (expected 0).
    """
    if n > PACKING_LIMIT:
        raise SizeLimitError(f"packing_experiment is limited to n <= {PACKING_LIMIT}")
    if n <= 0 or n % 5:
        raise ParameterError("n must be a positive multiple of 5")
    hist: dict[int, int] = {}
    violations = 0
    checks = 0
    min_slack = float("inf")
    for _ in range(pairs):
        G1 = sample_pentagon_graph(n, rng)
        G2 = sample_pentagon_graph(n, rng)
        m = min_joint_miss(G1, G2)
        hist[m] = hist.get(m, 0) + 1
        for PG in (G1, G2):
            trees = [cycle_respecting_tree(PG, rng), splitting_tree(PG, rng)]
            trees += [random_tree(n, rng) for _ in range(trees_per_graph)]
            for T in trees:
                rep = verify_miss_cost_bound(PG, T)
                checks += 1
                violations += not rep.passed
                min_slack = min(min_slack, rep.slack)
    return {
        "n": n,
        "pairs": pairs,
        "min_miss_histogram": {str(key): hist[key] for key in sorted(hist)},
        "miss_bound_checks": checks,
        "miss_bound_violations": violations,
        "miss_bound_min_slack": min_slack,
    }


def write_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
