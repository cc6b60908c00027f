"""Weighted undirected graphs, cut queries, k-NN construction and graph I/O.

Graphs are stored as a canonical edge list: parallel arrays ``u < v`` sorted
lexicographically, with strictly positive float64 weights.  A dense symmetric
view is built lazily for spectral code.  Instances are treated as immutable;
all arrays are flagged read-only.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

import numpy as np
from scipy.spatial.distance import cdist

from .errors import GraphFormatError, InvalidVertexError, ParameterError, ShapeError

VertexSetLike = Union[Iterable[int], np.ndarray]


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class WeightedGraph:
    """Symmetric, nonnegative, loop-free weighted graph on vertices ``0..n-1``."""

    __slots__ = ("n", "u", "v", "w", "_dense")

    def __init__(self, n: int, u, v, w, *, _canonical: bool = False):
        n = int(n)
        if n < 0:
            raise ParameterError(f"vertex count must be nonnegative, got {n}")
        u = np.asarray(u, dtype=np.int64).ravel()
        v = np.asarray(v, dtype=np.int64).ravel()
        w = np.asarray(w, dtype=np.float64).ravel()
        if not (u.shape == v.shape == w.shape):
            raise ShapeError("edge arrays must have equal length")
        if not _canonical:
            u, v, w = _canonicalize(n, u, v, w)
        self.n = n
        self.u = _readonly(u)
        self.v = _readonly(v)
        self.w = _readonly(w)
        self._dense = None

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple]) -> "WeightedGraph":
        """Build from ``(u, v)`` or ``(u, v, w)`` tuples; weight defaults to 1."""
        us, vs, ws = [], [], []
        for e in edges:
            us.append(e[0])
            vs.append(e[1])
            ws.append(e[2] if len(e) > 2 else 1.0)
        return cls(n, us, vs, ws)

    @classmethod
    def from_dense(cls, A) -> "WeightedGraph":
        A = np.asarray(A, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ShapeError(f"adjacency must be square, got shape {A.shape}")
        if not np.allclose(A, A.T, rtol=0, atol=0):
            raise ParameterError("adjacency matrix is not symmetric")
        if np.any(np.diag(A) != 0):
            raise ParameterError("adjacency matrix has nonzero diagonal (self-loops)")
        n = A.shape[0]
        iu, iv = np.triu_indices(n, k=1)
        w = A[iu, iv]
        keep = w != 0
        g = cls(n, iu[keep], iv[keep], w[keep])
        return g

    @classmethod
    def empty(cls, n: int) -> "WeightedGraph":
        return cls(n, [], [], [], _canonical=True)

    @property
    def m(self) -> int:
        """Number of stored (positive-weight) edges."""
        return int(self.u.size)

    def total_weight(self) -> float:
        """Sum of weights over unordered pairs."""
        return float(self.w.sum())

    def degrees(self) -> np.ndarray:
        """Weighted degree ``w(v, V - {v})`` of every vertex."""
        d = np.bincount(self.u, weights=self.w, minlength=self.n)
        d += np.bincount(self.v, weights=self.w, minlength=self.n)
        return d

    def dense(self) -> np.ndarray:
        """Read-only symmetric ``n x n`` adjacency matrix (cached)."""
        if self._dense is None:
            A = np.zeros((self.n, self.n))
            A[self.u, self.v] = self.w
            A[self.v, self.u] = self.w
            self._dense = _readonly(A)
        return self._dense

    def weight(self, a: int, b: int) -> float:
        if a == b:
            return 0.0
        a, b = min(a, b), max(a, b)
        _check_ids(self.n, np.array([a, b]))
        keys = self.u * self.n + self.v
        i = np.searchsorted(keys, a * self.n + b)
        if i < keys.size and keys[i] == a * self.n + b:
            return float(self.w[i])
        return 0.0

    def subgraph(self, vertices) -> "WeightedGraph":
        """Induced subgraph, vertices relabelled ``0..len(vertices)-1`` in the given order."""
        vertices = np.asarray(vertices, dtype=np.int64)
        _check_ids(self.n, vertices)
        relabel = np.full(self.n, -1, dtype=np.int64)
        relabel[vertices] = np.arange(vertices.size)
        keep = (relabel[self.u] >= 0) & (relabel[self.v] >= 0)
        return WeightedGraph(vertices.size, relabel[self.u[keep]], relabel[self.v[keep]], self.w[keep])

    def edges(self):
        for a, b, c in zip(self.u.tolist(), self.v.tolist(), self.w.tolist()):
            yield a, b, c

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.w, other.w)
        )

    def __hash__(self):
        return hash((self.n, self.u.tobytes(), self.v.tobytes(), self.w.tobytes()))

    def __repr__(self) -> str:
        return f"WeightedGraph(n={self.n}, m={self.m}, weight={self.total_weight():g})"


def _canonicalize(n, u, v, w):
    if u.size == 0:
        return u, v, w
    if np.any(u == v):
        raise ParameterError("self-loops are not allowed")
    _check_ids(n, u)
    _check_ids(n, v)
    if not np.all(np.isfinite(w)):
        raise ParameterError("edge weights must be finite")
    if np.any(w < 0):
        raise ParameterError("edge weights must be nonnegative")
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    keys = lo * n + hi
    order = np.argsort(keys, kind="stable")
    keys, lo, hi, w = keys[order], lo[order], hi[order], w[order]
    if np.any(keys[1:] == keys[:-1]):
        raise ParameterError("duplicate vertex pair in edge list")
    keep = w > 0
    return lo[keep].copy(), hi[keep].copy(), w[keep].copy()


def _check_ids(n: int, ids: np.ndarray) -> None:
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        bad = ids[(ids < 0) | (ids >= n)][0]
        raise InvalidVertexError(f"vertex id {bad} outside 0..{n - 1}")


def as_mask(n: int, S: VertexSetLike) -> np.ndarray:
    """Boolean membership vector for a vertex subset given as ids or a mask."""
    arr = np.asarray(S if not isinstance(S, (set, frozenset)) else sorted(S))
    if arr.dtype == bool:
        if arr.shape != (n,):
            raise ShapeError(f"mask must have length {n}")
        return arr
    ids = arr.astype(np.int64).ravel()
    _check_ids(n, ids)
    mask = np.zeros(n, dtype=bool)
    mask[ids] = True
    return mask


def cut_weight(G: WeightedGraph, S: VertexSetLike) -> float:
    """Total weight of edges with exactly one endpoint in ``S``."""
    mask = as_mask(G.n, S)
    return float(G.w[mask[G.u] != mask[G.v]].sum())


def group_weight(G: WeightedGraph, A: VertexSetLike, B: VertexSetLike) -> float:
    """``w(A, B)``: weight of unordered pairs with one endpoint in A and the other in B.

    Each unordered pair contributes at most once, so ``group_weight(G, S, S)``
    is the internal weight of ``S``.
    """
    a = as_mask(G.n, A)
    b = as_mask(G.n, B)
    hit = (a[G.u] & b[G.v]) | (a[G.v] & b[G.u])
    return float(G.w[hit].sum())


def perturb_one_edge(G: WeightedGraph, a: int, b: int, delta: float) -> WeightedGraph:
    """Adjacent graph with ``w(a, b)`` shifted by ``delta`` (``|delta| <= 1``)."""
    if a == b:
        raise ParameterError("cannot perturb a self-loop")
    if abs(delta) > 1:
        raise ParameterError(f"|delta| must be at most 1 for adjacent graphs, got {delta}")
    _check_ids(G.n, np.array([a, b]))
    new = G.weight(a, b) + delta
    if new < 0:
        raise ParameterError(f"perturbation would make w({a},{b}) = {new} negative")
    lo, hi = min(a, b), max(a, b)
    keep = ~((G.u == lo) & (G.v == hi))
    u, v, w = G.u[keep], G.v[keep], G.w[keep]
    if new > 0:
        u, v, w = np.append(u, lo), np.append(v, hi), np.append(w, new)
    return WeightedGraph(G.n, u, v, w)


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise ShapeError("points must form an (N, d) array with d >= 1")
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (pts.shape[0],):
                raise ShapeError("one label per point required")
            object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.points.shape[0]


def knn_graph(P: PointSet | np.ndarray, k: int, *, chunk: int = 1024) -> WeightedGraph:
    """Unit-weight symmetric k-nearest-neighbour graph (union of both directions).

    Ties at equal Euclidean distance go to the smaller point index.
    """
    if isinstance(P, PointSet):
        pts = P.points
    else:
        try:
            pts = np.asarray(P, dtype=np.float64)
        except ValueError as exc:
            raise ShapeError("points have mixed dimensions") from exc
        if pts.ndim != 2:
            raise ShapeError("points must form an (N, d) array")
    N = pts.shape[0]
    k = int(k)
    if k < 1 or k >= N:
        raise ParameterError(f"need 1 <= k < {N}, got k={k}")
    src, dst = [], []
    for start in range(0, N, chunk):
        stop = min(N, start + chunk)
        D = cdist(pts[start:stop], pts)
        D[np.arange(stop - start), np.arange(start, stop)] = np.inf
        nbrs = np.argsort(D, axis=1, kind="stable")[:, :k]
        src.append(np.repeat(np.arange(start, stop), k))
        dst.append(nbrs.ravel())
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    keys = np.unique(np.minimum(src, dst) * N + np.maximum(src, dst))
    return WeightedGraph(N, keys // N, keys % N, np.ones(keys.size), _canonical=True)


def _fmt_weight(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def write_graph(G: WeightedGraph, path) -> None:
    lines = [f"{G.n} {G.m}"]
    lines.extend(f"{a} {b} {_fmt_weight(c)}" for a, b, c in G.edges())
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_graph(path) -> WeightedGraph:
    """Parse the ``n m`` header + ``u v w`` line format."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_graph(text)


def parse_graph(text: str) -> WeightedGraph:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise GraphFormatError("empty graph file")
    try:
        if len(rows[0]) != 2:
            raise ValueError
        n, m = int(rows[0][0]), int(rows[0][1])
    except ValueError:
        raise GraphFormatError(f"malformed header {' '.join(rows[0])!r}; expected 'n m'") from None
    if n < 0 or m < 0:
        raise GraphFormatError("header values must be nonnegative")
    body = rows[1:]
    if len(body) != m:
        raise GraphFormatError(f"header declares {m} edges but file has {len(body)}")
    us = np.empty(m, dtype=np.int64)
    vs = np.empty(m, dtype=np.int64)
    ws = np.empty(m)
    for i, parts in enumerate(body, start=2):
        if len(parts) != 3:
            raise GraphFormatError(f"line {i}: expected 'u v w'")
        try:
            a, b, c = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise GraphFormatError(f"line {i}: cannot parse {' '.join(parts)!r}") from None
        if a == b:
            raise GraphFormatError(f"line {i}: self-loop on vertex {a}")
        if not (0 <= a < n and 0 <= b < n):
            raise GraphFormatError(f"line {i}: vertex id out of range 0..{n - 1}")
        if a > b:
            raise GraphFormatError(f"line {i}: endpoints must satisfy u < v")
        if not np.isfinite(c) or c < 0:
            raise GraphFormatError(f"line {i}: weight must be finite and >= 0")
        us[i - 2], vs[i - 2], ws[i - 2] = a, b, c
    keys = us * max(n, 1) + vs
    if np.unique(keys).size != keys.size:
        raise GraphFormatError("duplicate vertex pair")
    return WeightedGraph(n, us, vs, ws)


def read_points(path, *, label_column: bool = False) -> PointSet:
    """Load a CSV of points; optionally treat the final column as integer labels."""
    rows = []
    for ln in Path(path).read_text(encoding="utf-8").splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        fields = [f.strip() for f in ln.split(",")]
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            if rows:
                raise ShapeError(f"non-numeric row {ln!r}") from None
            continue  # header
    if not rows:
        raise ShapeError("no points in file")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ShapeError("points have mixed dimensions")
    data = np.array(rows)
    if label_column:
        return PointSet(data[:, :-1], data[:, -1].astype(np.int64))
    return PointSet(data)
