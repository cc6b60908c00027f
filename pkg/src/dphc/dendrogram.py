"""Binary hierarchical-clustering trees and Dasgupta's cost.

A :class:`Dendrogram` over ``n`` leaves uses the merge-table layout familiar
from agglomerative clustering: nodes ``0..n-1`` are the leaves (leaf ``i`` is
vertex ``i``) and internal node ``n + t`` joins ``children[t, 0]`` and
``children[t, 1]``.  Children always have smaller ids than their parent, so
node ids are a topological order and the root is ``2n - 2``.

Cost convention: the sum in Dasgupta's objective runs over unordered vertex
pairs, so the two-leaf tree on a unit edge costs 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GraphFormatError, ParameterError, ShapeError
from .graph import WeightedGraph, as_mask


class Dendrogram:
    __slots__ = ("n", "children", "sizes", "_minleaf", "_layout")

    def __init__(self, n: int, children):
        n = int(n)
        if n < 1:
            raise ParameterError("a dendrogram needs at least one leaf")
        ch = np.asarray(children, dtype=np.int64).reshape(-1, 2)
        if ch.shape[0] != n - 1:
            raise ShapeError(f"{n} leaves need {n - 1} merges, got {ch.shape[0]}")
        parent_ids = np.arange(n, 2 * n - 1)
        if ch.size and (ch.min() < 0 or np.any(ch >= parent_ids[:, None])):
            raise ShapeError("each merge must join two earlier nodes")
        used = np.bincount(ch.ravel(), minlength=2 * n - 1)
        if np.any(used[: 2 * n - 2] != 1):
            raise ShapeError("every non-root node must have exactly one parent")
        sizes = np.ones(2 * n - 1, dtype=np.int64)
        minleaf = np.arange(2 * n - 1, dtype=np.int64)
        for t in range(n - 1):
            a, b = ch[t]
            sizes[n + t] = sizes[a] + sizes[b]
            minleaf[n + t] = min(minleaf[a], minleaf[b])
        ch.setflags(write=False)
        sizes.setflags(write=False)
        minleaf.setflags(write=False)
        self.n = n
        self.children = ch
        self.sizes = sizes
        self._minleaf = minleaf
        self._layout = None

    # -- construction -----------------------------------------------------

    @classmethod
    def single(cls) -> "Dendrogram":
        return cls(1, np.empty((0, 2), dtype=np.int64))

    @classmethod
    def from_nested(cls, nested) -> "Dendrogram":
        """Build from nested 2-tuples/lists of leaf ids, e.g. ``((0, 1), (2, 3))``."""
        leaves = []

        def collect(x):
            if isinstance(x, (tuple, list)):
                if len(x) != 2:
                    raise ShapeError("every internal node needs exactly two children")
                collect(x[0])
                collect(x[1])
            else:
                leaves.append(int(x))

        collect(nested)
        n = len(leaves)
        if sorted(leaves) != list(range(n)):
            raise ShapeError("leaf ids must be a permutation of 0..n-1")
        b = MergeBuilder(n)

        def build(x):
            if isinstance(x, (tuple, list)):
                return b.merge(build(x[0]), build(x[1]))
            return int(x)

        build(nested)
        return b.build()

    @classmethod
    def from_newick(cls, text: str) -> "Dendrogram":
        s = text.strip()
        if not s.endswith(";"):
            raise GraphFormatError("Newick string must end with ';'")
        s = s[:-1].replace(" ", "")
        pos = 0

        def parse():
            nonlocal pos
            if pos >= len(s):
                raise GraphFormatError("unexpected end of Newick string")
            if s[pos] == "(":
                pos += 1
                left = parse()
                if pos >= len(s) or s[pos] != ",":
                    raise GraphFormatError(f"expected ',' at offset {pos}")
                pos += 1
                right = parse()
                if pos >= len(s) or s[pos] != ")":
                    raise GraphFormatError(f"expected ')' at offset {pos} (trees must be binary)")
                pos += 1
                return (left, right)
            start = pos
            while pos < len(s) and s[pos].isdigit():
                pos += 1
            if start == pos:
                raise GraphFormatError(f"expected leaf id at offset {start}")
            return int(s[start:pos])

        nested = parse()
        if pos != len(s):
            raise GraphFormatError(f"trailing characters at offset {pos}")
        return cls.from_nested(nested)

    # -- structure -----------------------------------------------------------

    @property
    def root(self) -> int:
        return 2 * self.n - 2

    @property
    def num_nodes(self) -> int:
        return 2 * self.n - 1

    def is_leaf(self, node: int) -> bool:
        return node < self.n

    def child_pair(self, node: int) -> tuple[int, int]:
        a, b = self.children[node - self.n]
        return int(a), int(b)

    def min_leaf(self, node: int) -> int:
        return int(self._minleaf[node])

    def _get_layout(self):
        # DFS leaf order in which every subtree occupies a contiguous interval.
        if self._layout is None:
            n = self.n
            start = np.zeros(2 * n - 1, dtype=np.int64)
            order = np.empty(n, dtype=np.int64)
            boundary = np.empty(max(n - 1, 0), dtype=np.int64)
            for node in range(2 * n - 2, n - 1, -1):
                a, b = self.children[node - n]
                start[a] = start[node]
                start[b] = start[node] + self.sizes[a]
                boundary[start[node] + self.sizes[a] - 1] = node
            order[start[:n]] = np.arange(n)
            self._layout = (start, order, boundary)
        return self._layout

    def leaf_order(self) -> np.ndarray:
        """Leaves in depth-first order; each subtree is a contiguous slice."""
        return self._get_layout()[1]

    def leaves(self, node: int) -> np.ndarray:
        start, order = self._get_layout()[:2]
        return np.sort(order[start[node] : start[node] + self.sizes[node]])

    def lca(self, a, b) -> np.ndarray:
        """Vectorized lowest common ancestor of leaf arrays ``a`` and ``b``."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        start, _, boundary = self._get_layout()[:3]
        pa, pb = start[a], start[b]
        lo = np.minimum(pa, pb)
        hi = np.maximum(pa, pb) - 1
        out = np.where(a == b, a, 0)
        diff = a != b
        if np.any(diff):
            out[diff] = _range_argmax(boundary, self.sizes, lo[diff], hi[diff], self._sparse_table())
        return out

    def _sparse_table(self):
        layout = self._get_layout()
        if len(layout) == 4:
            return layout[3]
        boundary = layout[2]
        table = [boundary]
        length = 1
        while 2 * length <= boundary.size:
            prev = table[-1]
            left, right = prev[:-length], prev[length:]
            table.append(np.where(self.sizes[left] >= self.sizes[right], left, right))
            length *= 2
        self._layout = layout + (table,)
        return table

    def parents(self) -> np.ndarray:
        par = np.full(2 * self.n - 1, -1, dtype=np.int64)
        if self.n > 1:
            par[self.children[:, 0]] = np.arange(self.n, 2 * self.n - 1)
            par[self.children[:, 1]] = np.arange(self.n, 2 * self.n - 1)
        return par

    def to_nested(self, node: int | None = None):
        node = self.root if node is None else node
        if node < self.n:
            return node
        a, b = self.child_pair(node)
        return (self.to_nested(a), self.to_nested(b))

    def to_newick(self) -> str:
        return _newick(self.to_nested()) + ";"

    def canonical(self) -> str:
        """Newick string with children ordered by smallest leaf; equal iff same topology."""
        parts = {i: str(i) for i in range(self.n)}
        for t in range(self.n - 1):
            a, b = self.children[t]
            if self._minleaf[a] > self._minleaf[b]:
                a, b = b, a
            parts[self.n + t] = f"({parts.pop(int(a))},{parts.pop(int(b))})"
        return parts[self.root] + ";"

    def __eq__(self, other):
        if not isinstance(other, Dendrogram):
            return NotImplemented
        return self.n == other.n and self.canonical() == other.canonical()

    def __hash__(self):
        return hash(self.canonical())

    def __repr__(self):
        return f"Dendrogram(n={self.n})" if self.n > 16 else f"Dendrogram({self.to_newick()})"


def _newick(x) -> str:
    if isinstance(x, tuple):
        return f"({_newick(x[0])},{_newick(x[1])})"
    return str(x)


def _range_argmax(values, key, lo, hi, table):
    span = hi - lo + 1
    level = np.floor(np.log2(span)).astype(np.int64)
    out = np.empty(lo.size, dtype=np.int64)
    for j in np.unique(level):
        sel = level == j
        t = table[j]
        x = t[lo[sel]]
        y = t[hi[sel] - (1 << j) + 1]
        out[sel] = np.where(key[x] >= key[y], x, y)
    return out


class MergeBuilder:
    """Accumulates merges over leaves ``0..n-1`` and emits a :class:`Dendrogram`."""

    def __init__(self, n: int):
        self.n = n
        self._merges: list[tuple[int, int]] = []

    def merge(self, a: int, b: int) -> int:
        self._merges.append((a, b))
        return self.n + len(self._merges) - 1

    def build(self) -> Dendrogram:
        if self.n == 1 and not self._merges:
            return Dendrogram.single()
        return Dendrogram(self.n, self._merges)


def _check_match(G: WeightedGraph, T: Dendrogram) -> None:
    if G.n != T.n:
        raise ShapeError(f"graph has {G.n} vertices but tree has {T.n} leaves")


def split_weights(G: WeightedGraph, T: Dendrogram) -> np.ndarray:
    """``w(S1, S2)`` for every internal node, indexed by ``node - n``."""
    _check_match(G, T)
    if T.n == 1:
        return np.zeros(0)
    node = T.lca(G.u, G.v)
    return np.bincount(node - T.n, weights=G.w, minlength=T.n - 1)


def dasgupta_cost(G: WeightedGraph, T: Dendrogram) -> float:
    """Sum over splits ``S -> (S1, S2)`` of ``|S| * w(S1, S2)``."""
    sw = split_weights(G, T)
    return float(np.dot(sw, T.sizes[T.n :]))


def cost_via_cuts(G: WeightedGraph, T: Dendrogram) -> tuple[float, float]:
    """Cut decomposition ``(omega1, omega2)`` with ``omega1 + omega2 == dasgupta_cost``.

    ``omega1`` halves the split term ``sum |S2| w(S1, ~S1) + |S1| w(S2, ~S2)``
    and ``omega2`` halves ``sum_v w(v, ~v)`` (so equals the total weight),
    matching the unordered-pair cost convention.  Cuts are evaluated from
    explicit leaf indicators, independently of the LCA path used by
    :func:`dasgupta_cost`; cost is cubic in ``n``.
    """
    _check_match(G, T)
    n = T.n
    omega2 = 0.5 * float(G.degrees().sum())
    if n == 1 or G.m == 0:
        return 0.0, omega2
    A = G.dense()
    M = np.zeros((2 * n - 1, n))
    M[np.arange(n), np.arange(n)] = 1.0
    for t in range(n - 1):
        a, b = T.children[t]
        M[n + t] = M[a] + M[b]
    cuts = ((M @ A) * (1.0 - M)).sum(axis=1)
    a, b = T.children[:, 0], T.children[:, 1]
    omega1 = 0.5 * float(np.sum(T.sizes[b] * cuts[a] + T.sizes[a] * cuts[b]))
    return omega1, omega2


@dataclass(frozen=True)
class BalancedCut:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=bool)
        B = np.asarray(self.B, dtype=bool)
        n = A.size
        if B.size != n or np.any(A & B) or not np.all(A | B):
            raise ShapeError("A and B must partition the vertex set")
        if not (n / 3 <= A.sum() <= 2 * n / 3):
            raise ParameterError(f"|A| = {A.sum()} is not within [n/3, 2n/3] for n = {n}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @classmethod
    def from_sets(cls, n: int, A) -> "BalancedCut":
        a = as_mask(n, A)
        return cls(a, ~a)


def balanced_cut_of_tree(T: Dendrogram) -> BalancedCut:
    """Follow the heavier child from the root to the first node below ``2n/3`` leaves."""
    n = T.n
    if n < 3:
        raise ParameterError("balanced cut of a tree needs n >= 3")
    node = T.root
    while 3 * T.sizes[node] >= 2 * n:
        a, b = T.child_pair(node)
        sa, sb = T.sizes[a], T.sizes[b]
        if sa != sb:
            node = a if sa > sb else b
        else:
            node = a if T.min_leaf(a) < T.min_leaf(b) else b
    mask = np.zeros(n, dtype=bool)
    mask[T.leaves(node)] = True
    return BalancedCut(mask, ~mask)


def random_merges(builder: MergeBuilder, nodes, rng: np.random.Generator) -> int:
    """Merge two uniformly chosen distinct roots until one remains; returns it."""
    roots = [int(x) for x in nodes]
    if not roots:
        raise ParameterError("cannot build a tree over no leaves")
    while len(roots) > 1:
        r = len(roots)
        i = int(rng.integers(r))
        j = int(rng.integers(r - 1))
        if j >= i:
            j += 1
        new = builder.merge(roots[i], roots[j])
        hi, lo = max(i, j), min(i, j)
        roots[lo] = new
        roots[hi] = roots[-1]
        roots.pop()
    return roots[0]


def random_tree(n: int, rng: np.random.Generator) -> Dendrogram:
    """Uniform random agglomeration over ``n`` leaves."""
    if n < 1:
        raise ParameterError("random_tree needs n >= 1")
    b = MergeBuilder(n)
    random_merges(b, range(n), rng)
    return b.build()
