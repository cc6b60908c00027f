"""Exhaustive tree spaces: enumeration, exact optimum, and the exponential mechanism.

The mechanism's range is every binary leaf-labelled topology on ``n`` leaves
(``(2n-3)!!`` of them).  Sampling does not materialise that list: Dasgupta's
cost is a sum of per-split terms ``|S| w(S1, S2)``, so the Gibbs weights
factor over splits and a dynamic program over vertex subsets (3^n work)
gives the exact partition function and an exact top-down sampler.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .dendrogram import Dendrogram, MergeBuilder
from .errors import ParameterError, SizeLimitError
from .graph import WeightedGraph

MAX_ENUM_LEAVES = 10


def tree_count(n: int) -> int:
    """``(2n - 3)!!`` rooted binary trees with ``n`` labelled leaves."""
    if n < 1:
        raise ParameterError("n must be positive")
    return math.prod(range(1, 2 * n - 2, 2)) if n > 1 else 1


def iter_trees(n: int):
    """Yield every binary topology on leaves ``0..n-1`` (leaf-insertion order)."""
    if n < 2:
        raise ParameterError("enumeration needs n >= 2")
    if n > MAX_ENUM_LEAVES:
        raise SizeLimitError(f"enumeration is limited to n <= {MAX_ENUM_LEAVES}")

    def insert(tree, leaf):
        # Attach ``leaf`` above every node of ``tree``.
        yield (tree, leaf)
        if isinstance(tree, tuple):
            for sub in insert(tree[0], leaf):
                yield (sub, tree[1])
            for sub in insert(tree[1], leaf):
                yield (tree[0], sub)

    def grow(tree, nxt):
        if nxt == n:
            yield tree
            return
        for t in insert(tree, nxt):
            yield from grow(t, nxt + 1)

    for nested in grow((0, 1), 2):
        yield Dendrogram.from_nested(nested)


def enumerate_trees(n: int) -> list[Dendrogram]:
    return list(iter_trees(n))


class _SubsetTable:
    """Per-subset internal weights and the unordered splits of every subset."""

    def __init__(self, G: WeightedGraph, limit: int):
        n = G.n
        if n > limit:
            raise SizeLimitError(f"exhaustive tree search is limited to n <= {limit}, got {n}")
        self.n = n
        full = 1 << n
        A = G.dense()
        internal = np.zeros(full)
        pop = np.zeros(full, dtype=np.int64)
        for mask in range(1, full):
            low = mask & -mask
            v = low.bit_length() - 1
            rest = mask ^ low
            pop[mask] = pop[rest] + 1
            if rest:
                idx = [i for i in range(n) if rest >> i & 1]
                internal[mask] = internal[rest] + A[v, idx].sum()
        self.internal = internal
        self.pop = pop

    def splits(self, mask: int):
        low = mask & -mask
        rest = mask ^ low
        sub = rest
        while True:
            s1 = low | sub
            s2 = mask ^ s1
            if s2:
                yield s1, s2, self.internal[mask] - self.internal[s1] - self.internal[s2]
            if sub == 0:
                break
            sub = (sub - 1) & rest


def _masks_by_size(n: int):
    return sorted(range(1, 1 << n), key=lambda m: bin(m).count("1"))


def _leaves_of(mask: int, n: int):
    return [i for i in range(n) if mask >> i & 1]


def optimal_tree(G: WeightedGraph, *, limit: int = 14) -> tuple[Dendrogram, float]:
    """Exact minimum-cost tree by dynamic programming over subsets (small ``n`` only)."""
    n = G.n
    if n == 1:
        return Dendrogram.single(), 0.0
    tab = _SubsetTable(G, limit)
    best = {}
    choice = {}
    for mask in _masks_by_size(n):
        if tab.pop[mask] == 1:
            best[mask] = 0.0
            continue
        size = tab.pop[mask]
        b, c = math.inf, None
        for s1, s2, w12 in tab.splits(mask):
            val = size * w12 + best[s1] + best[s2]
            if val < b:
                b, c = val, (s1, s2)
        best[mask], choice[mask] = b, c
    builder = MergeBuilder(n)

    def build(mask):
        if tab.pop[mask] == 1:
            return mask.bit_length() - 1
        s1, s2 = choice[mask]
        return builder.merge(build(s1), build(s2))

    build((1 << n) - 1)
    return builder.build(), float(best[(1 << n) - 1])


class TreeSampler:
    """Exact sampler for ``Pr[T] proportional to exp(-beta * cost(T))``.

    The subset tables are built once, so repeated draws cost ``O(n)`` each.
    """

    def __init__(self, G: WeightedGraph, beta: float):
        n = G.n
        if n > MAX_ENUM_LEAVES:
            raise SizeLimitError(f"the exponential mechanism is limited to n <= {MAX_ENUM_LEAVES}")
        self.n = n
        self.beta = beta
        self.log_partition = 0.0
        self._options = {}
        if n == 1:
            return
        tab = _SubsetTable(G, MAX_ENUM_LEAVES)
        self._pop = tab.pop
        logz = {}
        for mask in _masks_by_size(n):
            if tab.pop[mask] == 1:
                logz[mask] = 0.0
                continue
            size = tab.pop[mask]
            pairs, terms = [], []
            for s1, s2, w12 in tab.splits(mask):
                pairs.append((s1, s2))
                terms.append(-beta * size * w12 + logz[s1] + logz[s2])
            terms = np.array(terms)
            top = terms.max()
            logz[mask] = top + math.log(np.exp(terms - top).sum())
            # cumulative split probabilities, stabilised by the subtracted maximum
            self._options[mask] = (pairs, np.cumsum(np.exp(terms - logz[mask])))
        self.log_partition = logz[(1 << n) - 1]

    def sample(self, rng: np.random.Generator) -> Dendrogram:
        if self.n == 1:
            return Dendrogram.single()
        builder = MergeBuilder(self.n)

        def draw(mask):
            if self._pop[mask] == 1:
                return mask.bit_length() - 1
            pairs, cdf = self._options[mask]
            i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            s1, s2 = pairs[min(i, len(pairs) - 1)]
            return builder.merge(draw(s1), draw(s2))

        draw((1 << self.n) - 1)
        return builder.build()


def exponential_mechanism_sampler(G: WeightedGraph, epsilon: float) -> TreeSampler:
    """Sampler for the mechanism with utility ``-cost / n`` (sensitivity 1).

    A single pair's weight moves any tree's cost by at most ``n`` under
    unit-L1 edge adjacency, hence the ``epsilon / (2n)`` inverse temperature.
    ``epsilon = 0`` is accepted and samples uniformly (a test hook, not private use).
    """
    if epsilon < 0:
        raise ParameterError("epsilon must be nonnegative")
    return TreeSampler(G, epsilon / (2.0 * G.n))


def exponential_mechanism_tree(G: WeightedGraph, epsilon: float, rng: np.random.Generator) -> Dendrogram:
    """Sample ``T`` with probability proportional to ``exp(-epsilon * cost(T) / (2n))``."""
    return exponential_mechanism_sampler(G, epsilon).sample(rng)


@lru_cache(maxsize=None)
def _double_factorial_log(n: int) -> float:
    return math.log(tree_count(n))


def exp_mech_utility_slack(n: int, epsilon: float) -> float:
    """Additive cost slack ``2 n log((2n-3)!!) / epsilon`` of the utility guarantee."""
    return 2.0 * n * _double_factorial_log(n) / epsilon
