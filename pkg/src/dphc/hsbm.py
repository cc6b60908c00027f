"""Hierarchical stochastic block models.

A :class:`GroundTruthTree` holds a partition of the vertices into blocks, a
rooted tree ``P`` whose leaves are the blocks, and a probability ``f`` on every
node of ``P``.  An edge ``(u, v)`` appears independently with probability
``f(LCA_P(block(u), block(v)))``.

Tree nodes are numbered ``0..k-1`` for the blocks and ``k..`` for internal
nodes; ``parent[root] == -1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dendrogram import Dendrogram, MergeBuilder, random_merges
from .errors import ParameterError, ShapeError
from .graph import WeightedGraph
from .privacy import derive_rng


class GroundTruthTree:
    """Blocks, block hierarchy and node probabilities ``(B, P, f)``.

    ``f`` may be ``nan`` on leaf blocks when only the merge levels are known
    (as in trees fitted from data).  ``strict=False`` skips the
    strictly-increasing-downwards check, which fitted trees need because
    noisy merge levels can tie or leave ``[0, 1]``.
    """

    def __init__(self, blocks, parent, f, *, n: int | None = None, strict: bool = True,
                 permutation_seed: int | None = None):
        blocks = [np.sort(np.asarray(b, dtype=np.int64)) for b in blocks]
        k = len(blocks)
        if k < 1:
            raise ParameterError("a ground-truth tree needs at least one block")
        if any(b.size == 0 for b in blocks):
            raise ParameterError("blocks must be nonempty")
        allv = np.concatenate(blocks)
        n = int(allv.size) if n is None else int(n)
        if allv.size != n or np.unique(allv).size != n or allv.min() < 0 or allv.max() >= n:
            raise ShapeError("blocks must partition 0..n-1")
        parent = np.asarray(parent, dtype=np.int64)
        f = np.asarray(f, dtype=np.float64)
        if parent.shape != f.shape or parent.size < k:
            raise ShapeError("parent and f must cover every tree node")
        roots = np.flatnonzero(parent < 0)
        if roots.size != 1:
            raise ShapeError("the block tree must have exactly one root")
        self.n = n
        self.k = k
        self.blocks = blocks
        self.parent = parent
        self.f = f
        self.root = int(roots[0])
        self.permutation_seed = permutation_seed
        self.block_of = np.empty(n, dtype=np.int64)
        for i, b in enumerate(blocks):
            self.block_of[b] = i
        self.depth = self._depths()
        if k > 1 and np.any(np.isin(np.arange(k), parent)):
            raise ShapeError("blocks must be leaves of the block tree")
        internal = np.arange(k, parent.size)
        if np.any(~np.isin(internal, parent)):
            raise ShapeError("every internal node needs a child")
        vals = f[~np.isnan(f)]
        if strict:
            if np.any(np.isnan(f)):
                raise ParameterError("f must be defined on every node")
            if np.any((vals < 0) | (vals > 1)):
                raise ParameterError("f values must be probabilities")
            for node in range(parent.size):
                p = parent[node]
                if p >= 0 and not f[p] < f[node]:
                    raise ParameterError(
                        f"f must increase strictly downwards: f({p})={f[p]} >= f({node})={f[node]}"
                    )
        self._lca = self._block_lca()

    def _depths(self):
        depth = np.full(self.parent.size, -1, dtype=np.int64)
        for node in range(self.parent.size):
            chain = []
            x = node
            while x >= 0 and depth[x] < 0:
                chain.append(x)
                x = self.parent[x]
                if len(chain) > self.parent.size:
                    raise ShapeError("block tree contains a cycle")
            d = -1 if x < 0 else depth[x]
            for y in reversed(chain):
                d += 1
                depth[y] = d
        return depth

    def _block_lca(self):
        k = self.k
        L = np.empty((k, k), dtype=np.int64)
        for i in range(k):
            anc = []
            x = i
            while x >= 0:
                anc.append(x)
                x = self.parent[x]
            anc_set = {a: t for t, a in enumerate(anc)}
            for j in range(k):
                y = j
                while y not in anc_set:
                    y = self.parent[y]
                L[i, j] = y
        return L

    @property
    def block_sizes(self) -> np.ndarray:
        return np.array([b.size for b in self.blocks])

    def block_lca(self, i: int, j: int) -> int:
        return int(self._lca[i, j])

    def block_probabilities(self) -> np.ndarray:
        """``k x k`` matrix of ``f(LCA_P(B_i, B_j))`` (diagonal is ``f(B_i)``)."""
        return self.f[self._lca]

    def children(self, node: int) -> list[int]:
        return [int(c) for c in np.flatnonzero(self.parent == node)]

    def to_nested(self, node: int | None = None):
        node = self.root if node is None else node
        if node < self.k:
            return node
        return [self.to_nested(c) for c in self.children(node)]

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict:
        order = _postorder_internal(self)
        rename = {i: i for i in range(self.k)}
        rename.update({old: self.k + t for t, old in enumerate(order)})
        f_values = {str(rename[node]): (None if math.isnan(self.f[node]) else float(self.f[node]))
                    for node in range(self.parent.size)}
        out = {
            "n": self.n,
            "k": self.k,
            "block_sizes": [int(b.size) for b in self.blocks],
            "ptree": self.to_nested(),
            "f_values": f_values,
            "permutation_seed": self.permutation_seed,
        }
        implied = np.split(_assignment(self.n, self.permutation_seed), np.cumsum(self.block_sizes)[:-1])
        if any(not np.array_equal(np.sort(a), b) for a, b in zip(implied, self.blocks)):
            out["blocks"] = [b.tolist() for b in self.blocks]
        return out

    @classmethod
    def from_json(cls, data: dict, *, strict: bool = True) -> "GroundTruthTree":
        n, k = int(data["n"]), int(data["k"])
        sizes = [int(s) for s in data["block_sizes"]]
        if len(sizes) != k or sum(sizes) != n:
            raise ShapeError("block_sizes must have k entries summing to n")
        if "blocks" in data:
            blocks = [np.asarray(b, dtype=np.int64) for b in data["blocks"]]
        else:
            order = _assignment(n, data.get("permutation_seed"))
            blocks = np.split(order, np.cumsum(sizes)[:-1])
        parent, names = _parent_from_nested(data["ptree"], k)
        f = np.full(len(parent), np.nan)
        for key, val in data["f_values"].items():
            f[names[int(key)]] = np.nan if val is None else float(val)
        return cls(blocks, parent, f, n=n, strict=strict, permutation_seed=data.get("permutation_seed"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path, *, strict: bool = True) -> "GroundTruthTree":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")), strict=strict)

    @classmethod
    def from_nested(cls, blocks, nested, f_values: dict, **kw) -> "GroundTruthTree":
        """``nested``: nested lists with block indices at the leaves; ``f_values``
        maps block indices and post-order internal ids (``k, k+1, ...``) to ``f``."""
        k = len(blocks)
        parent, names = _parent_from_nested(nested, k)
        f = np.full(len(parent), np.nan)
        for key, val in f_values.items():
            f[names[int(key)]] = val
        return cls(blocks, parent, f, **kw)


def _assignment(n: int, seed) -> np.ndarray:
    if seed is None:
        return np.arange(n)
    return derive_rng(int(seed), 0).permutation(n)


def _postorder_internal(M: GroundTruthTree) -> list[int]:
    out = []

    def visit(node):
        if node < M.k:
            return
        for c in M.children(node):
            visit(c)
        out.append(node)

    visit(M.root)
    return out


def _parent_from_nested(nested, k: int):
    parent = {}
    names = {}
    counter = [k]
    seen = set()

    def visit(x):
        if isinstance(x, (list, tuple)):
            if len(x) < 2:
                raise ShapeError("internal nodes of the block tree need at least two children")
            kids = [visit(c) for c in x]
            node = counter[0]
            counter[0] += 1
            for c in kids:
                parent[c] = node
            names[node] = node
            return node
        b = int(x)
        if not 0 <= b < k or b in seen:
            raise ShapeError(f"block tree leaves must be the distinct block ids 0..{k - 1}")
        seen.add(b)
        names[b] = b
        return b

    root = visit(nested)
    if len(seen) != k:
        raise ShapeError("every block must appear once in the block tree")
    parent[root] = -1
    arr = np.array([parent[i] for i in range(counter[0])], dtype=np.int64)
    return arr, names


# -- edge probabilities and sampling ---------------------------------------------


def edge_probability(M: GroundTruthTree, u: int, v: int) -> float:
    if u == v:
        raise ParameterError("edge probability is undefined for a self-loop")
    if not (0 <= u < M.n and 0 <= v < M.n):
        raise ParameterError("vertex id out of range")
    return float(M.f[M._lca[M.block_of[u], M.block_of[v]]])


def sample_graph(M: GroundTruthTree, rng: np.random.Generator, *, chunk_rows: int = 512) -> WeightedGraph:
    """Unweighted graph with each pair present independently with its HSBM probability."""
    F = M.block_probabilities()
    lab = M.block_of
    n = M.n
    us, vs = [], []
    for start in range(0, n, chunk_rows):
        stop = min(n, start + chunk_rows)
        probs = F[lab[start:stop]][:, lab]
        draw = rng.random((stop - start, n)) < probs
        rows, cols = np.nonzero(draw)
        rows = rows + start
        keep = cols > rows
        us.append(rows[keep])
        vs.append(cols[keep])
    u = np.concatenate(us) if us else np.zeros(0, dtype=np.int64)
    v = np.concatenate(vs) if vs else np.zeros(0, dtype=np.int64)
    return WeightedGraph(n, u, v, np.ones(u.size), _canonical=True)


def ground_truth_dendrogram(M: GroundTruthTree, rng: np.random.Generator) -> Dendrogram:
    """Leaf-level tree that follows ``P`` above the blocks, uniform random inside each block."""
    builder = MergeBuilder(M.n)

    def build(node):
        if node < M.k:
            return random_merges(builder, M.blocks[node], rng)
        return random_merges(builder, [build(c) for c in M.children(node)], rng)

    build(M.root)
    return builder.build()


def expectation_matrix(M: GroundTruthTree, *, include_diagonal: bool = False) -> np.ndarray:
    """``A[u, v] = f(LCA)``; zero diagonal unless ``include_diagonal``."""
    F = M.block_probabilities()
    A = F[M.block_of][:, M.block_of]
    if not include_diagonal:
        np.fill_diagonal(A, 0.0)
    return A


@dataclass(frozen=True)
class ExpectationStats:
    delta: float  # min column distance between vertices of different blocks
    tau: float  # max f
    s: int  # smallest block
    sigma: np.ndarray  # top-k singular values, descending


def block_separation(M: GroundTruthTree, *, include_diagonal: bool = False) -> float:
    """``min ||A_u - A_v||_2`` over ``u``, ``v`` in different blocks; ``inf`` for one block.

    Columns depend only on the block except for the zeroed diagonal, so each
    block pair has a single closed-form distance.
    """
    if M.k == 1:
        return math.inf
    F = M.block_probabilities()
    sizes = M.block_sizes.astype(float)
    best = math.inf
    for i in range(M.k):
        for j in range(i + 1, M.k):
            d2 = float(np.sum(sizes * (F[:, i] - F[:, j]) ** 2))
            if not include_diagonal:
                # rows u and v: the diagonal zero replaces f(B_i) resp. f(B_j)
                d2 += -(F[i, i] - F[i, j]) ** 2 - (F[j, i] - F[j, j]) ** 2 + 2 * F[i, j] ** 2
            best = min(best, math.sqrt(max(d2, 0.0)))
    return best


def expectation_stats(M: GroundTruthTree, *, include_diagonal: bool = False) -> ExpectationStats:
    A = expectation_matrix(M, include_diagonal=include_diagonal)
    ev = np.linalg.eigvalsh(A)
    sigma = np.sort(np.abs(ev))[::-1][: M.k]
    return ExpectationStats(
        delta=block_separation(M, include_diagonal=include_diagonal),
        tau=float(np.nanmax(M.f)),
        s=int(M.block_sizes.min()),
        sigma=sigma,
    )


def gamma_of(M: GroundTruthTree, M2: GroundTruthTree) -> float:
    """Smallest ``gamma`` with ``f / gamma <= f' <= gamma f`` over all block pairs.

    Block pairs are matched by vertex content.  The diagonal (a block with
    itself) is included only where both trees define ``f`` on the block.
    A zero matched with a nonzero value gives ``inf``.
    """
    if M.n != M2.n or M.k != M2.k:
        raise ShapeError("models must share the same blocks")
    key = {tuple(b.tolist()): i for i, b in enumerate(M2.blocks)}
    try:
        perm = np.array([key[tuple(b.tolist())] for b in M.blocks])
    except KeyError:
        raise ShapeError("models must share the same blocks") from None
    F1 = M.block_probabilities()
    F2 = M2.block_probabilities()[np.ix_(perm, perm)]
    mask = ~np.eye(M.k, dtype=bool) | (~np.isnan(F1) & ~np.isnan(F2))
    a, b = F1[mask], F2[mask]
    if a.size == 0:
        return 1.0
    if np.any(np.isnan(a) | np.isnan(b)):
        raise ParameterError("f undefined at a block-pair LCA")
    both_zero = (a == 0) & (b == 0)
    if np.any(((a == 0) | (b == 0)) & ~both_zero):
        return math.inf
    a, b = a[~both_zero], b[~both_zero]
    if a.size == 0:
        return 1.0
    if np.any((a < 0) | (b < 0)):
        raise ParameterError("gamma is undefined for negative level values")
    return float(max(1.0, np.max(b / a), np.max(a / b)))


# -- the synthetic experiment model ---------------------------------------------


def largest_remainder(n: int, weights) -> np.ndarray:
    """Integer apportionment of ``n`` proportional to ``weights`` (Hamilton's method).

    Leftover units go to the largest fractional parts; ties favour the larger
    weight, then the later index.
    """
    w = np.asarray(weights, dtype=float)
    quota = n * w / w.sum()
    base = np.floor(quota).astype(np.int64)
    rem = n - int(base.sum())
    frac = quota - base
    order = sorted(range(w.size), key=lambda i: (-frac[i], -w[i], -i))
    for i in order[:rem]:
        base[i] += 1
    return base


def balanced_nested(k: int):
    if k == 1:
        return 0

    def build(lo, hi):
        if hi - lo == 1:
            return lo
        mid = (lo + hi) // 2
        return [build(lo, mid), build(mid, hi)]

    return build(0, k)


def experiment_model(n: int, k: int, rng: np.random.Generator | None = None, *, shuffle: bool = True,
                     f_range=(0.1, 0.9), size_ratio: float = 3.0) -> GroundTruthTree:
    """Geometric block sizes (largest/smallest = 3), balanced ``P``, ``f`` linear in depth."""
    if k < 1 or k & (k - 1):
        raise ParameterError(f"k must be a power of two, got {k}")
    if n < k:
        raise ParameterError("need at least one vertex per block")
    ratio = size_ratio ** (1.0 / (k - 1)) if k > 1 else 1.0
    sizes = largest_remainder(n, ratio ** np.arange(k))
    if np.any(sizes == 0):
        raise ParameterError("block size rounding produced an empty block")
    seed = int(rng.integers(0, 2**63 - 1)) if (shuffle and rng is not None) else None
    order = _assignment(n, seed)
    blocks = np.split(order, np.cumsum(sizes)[:-1])
    nested = balanced_nested(k)
    parent, _ = _parent_from_nested(nested, k)
    M0 = GroundTruthTree(blocks, parent, np.zeros(parent.size), n=n, strict=False)
    d = int(M0.depth[:k].max())
    lo, hi = f_range
    f = hi if d == 0 else lo + (hi - lo) * M0.depth / d
    f = np.broadcast_to(f, parent.shape).astype(float)
    return GroundTruthTree(blocks, parent, f, n=n, permutation_seed=seed)


def planted_partition(sizes, p: float, q: float, rng: np.random.Generator | None = None) -> GroundTruthTree:
    """``k`` blocks under one root: ``p`` within blocks, ``q`` between."""
    sizes = list(sizes)
    n = sum(sizes)
    seed = int(rng.integers(0, 2**63 - 1)) if rng is not None else None
    order = _assignment(n, seed)
    blocks = np.split(order, np.cumsum(sizes)[:-1])
    k = len(sizes)
    if k == 1:
        return GroundTruthTree(blocks, [-1], [p], n=n, permutation_seed=seed)
    parent = np.array([k] * k + [-1])
    f = np.array([p] * k + [q], dtype=float)
    return GroundTruthTree(blocks, parent, f, n=n, permutation_seed=seed)
