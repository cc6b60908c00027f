"""Sanitize-then-cluster baselines: Laplace graph release, linkage trees, recursive sparse cuts.

Everything downstream of :func:`laplace_sanitize` reads only the sanitized
graph, so the trees are private by post-processing.  :func:`best_linkage_cost`
evaluates candidate trees against the private graph; that number is a
reporting step and is not part of any released output.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy.sparse.csgraph import connected_components

from .agglomerate import MODES, agglomerate
from .dendrogram import Dendrogram, MergeBuilder, dasgupta_cost
from .errors import ParameterError, ShapeError
from .graph import WeightedGraph
from .privacy import sample_laplace

log = logging.getLogger(__name__)

EXHAUSTIVE_CUT_LIMIT = 16


def laplace_sanitize(G: WeightedGraph, epsilon: float, rng: np.random.Generator) -> WeightedGraph:
    """Add Lap(1/epsilon) to every unordered pair and truncate at zero.

    One edge moves one pair weight, so each draw has sensitivity 1.  The
    output is dense: about half of the empty pairs come out positive.
    """
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    n = G.n
    iu, ju = np.triu_indices(n, 1)
    w = G.dense()[iu, ju] + sample_laplace(1.0 / epsilon, rng, size=iu.size)
    keep = w > 0
    return WeightedGraph(n, iu[keep], ju[keep], w[keep], _canonical=True)


# -- cut-query certification ------------------------------------------------------


def _cut_values(A: np.ndarray, X: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", X @ A, 1.0 - X)


def _cut_masks(n: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    if n <= EXHAUSTIVE_CUT_LIMIT:
        # vertex n-1 always on the complement side: each cut exactly once
        codes = np.arange(1, 1 << (n - 1))
        return ((codes[:, None] >> np.arange(n)) & 1).astype(np.float64)
    X = rng.random((samples, n)) < 0.5
    sz = X.sum(1)
    X = X[(sz > 0) & (sz < n)]
    return X.astype(np.float64)


def cut_errors(G: WeightedGraph, G2: WeightedGraph, samples: int, rng: np.random.Generator):
    """``(w(S), w'(S), min(|S|, n-|S|))`` over all cuts (n <= 16) or ``samples`` random ones."""
    if G.n != G2.n:
        raise ShapeError("graphs must share the vertex set")
    n = G.n
    if n < 2:
        return np.zeros(0), np.zeros(0), np.zeros(0)
    X = _cut_masks(n, samples, rng)
    sz = X.sum(1)
    return _cut_values(G.dense(), X), _cut_values(G2.dense(), X), np.minimum(sz, n - sz)


def beta_for_alpha(c, c2, norm, alpha: float) -> float:
    """Smallest ``beta`` making the two-sided cut inequality hold at a given ``alpha``."""
    if c.size == 0:
        return 0.0
    slack = np.maximum(np.abs(c2 - c) - alpha * c, 0.0)
    return float(np.max(slack / norm))


def certify_cut_approx(G: WeightedGraph, G2: WeightedGraph, samples: int = 2000,
                       rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Empirical ``(alpha, beta)`` for which ``G2`` approximates the cuts of ``G``.

    If a purely multiplicative fit with ``alpha < 1`` exists it is returned
    as ``(alpha, 0)``; otherwise the additive fit ``(0, beta)``.  Either pair
    satisfies the inequality on every checked cut.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    c, c2, norm = cut_errors(G, G2, samples, rng)
    if c.size == 0:
        return 0.0, 0.0
    diff = np.abs(c2 - c)
    zero = c == 0
    if np.any(zero & (diff > 0)):
        alpha = np.inf
    else:
        alpha = float(np.max(diff[~zero] / c[~zero])) if np.any(~zero) else 0.0
    if alpha < 1.0:
        return alpha, 0.0
    return 0.0, beta_for_alpha(c, c2, norm, 0.0)


# -- linkage --------------------------------------------------------------------


def linkage_tree(G: WeightedGraph, mode: str = "average") -> Dendrogram:
    """Agglomerative linkage with edge weights as similarities (absent pairs are 0)."""
    n = G.n
    if n < 1:
        raise ParameterError("need at least one vertex")
    builder = MergeBuilder(n)
    node = list(range(n))
    for i, j, _ in agglomerate(G.dense(), mode):
        node[i] = builder.merge(node[i], node[j])
    return builder.build()


def best_linkage_cost(G_private: WeightedGraph, G_sanitized: WeightedGraph):
    """Best of single, complete and average linkage on ``G_sanitized``, scored on ``G_private``.

    Returns ``(tree, cost, mode)``.  Ties keep the earlier mode.
    """
    best = None
    for mode in MODES:
        T = linkage_tree(G_sanitized, mode)
        c = dasgupta_cost(G_private, T)
        if best is None or c < best[1]:
            best = (T, c, mode)
    return best


# -- recursive sparse cut --------------------------------------------------------


def _sweep_split(W: np.ndarray) -> np.ndarray:
    """Boolean side of the best Fiedler sweep cut of a connected weighted graph."""
    N = W.shape[0]
    deg = W.sum(1)
    dinv = 1.0 / np.sqrt(deg)
    L = np.eye(N) - dinv[:, None] * W * dinv[None, :]
    _, vecs = np.linalg.eigh(L)
    x = vecs[:, 1] * dinv
    order = np.argsort(x, kind="stable")
    Ws = W[np.ix_(order, order)]
    inner = np.tril(Ws, -1).sum(1)
    cut = np.cumsum(deg[order] - 2.0 * inner)[:-1]
    t = np.arange(1, N)
    ratio = cut / (t * (N - t))
    best = int(np.argmin(ratio)) + 1
    side = np.zeros(N, dtype=bool)
    side[order[:best]] = True
    return side


def _median_split(W: np.ndarray) -> np.ndarray:
    order = np.argsort(-W.sum(1), kind="stable")
    side = np.zeros(W.shape[0], dtype=bool)
    side[order[: W.shape[0] // 2]] = True
    return side


def _split(W: np.ndarray) -> np.ndarray:
    ncomp, lab = connected_components(W > 0, directed=False)
    if ncomp > 1:
        return lab == lab[0]
    try:
        return _sweep_split(W)
    except np.linalg.LinAlgError:
        log.warning("eigensolver failed on a %d-vertex part; using a degree-ordered median split", W.shape[0])
        return _median_split(W)


def sparse_cut_tree(G: WeightedGraph) -> Dendrogram:
    """Recursively bisect by the normalized-Laplacian Fiedler sweep cut.

    The sweep minimises ``w(S, S^c) / (|S| |S^c|)``.  Disconnected parts are
    split by connected components first (zero-weight cuts).
    """
    n = G.n
    if n < 1:
        raise ParameterError("need at least one vertex")
    A = G.dense()
    builder = MergeBuilder(n)
    # explicit post-order stack: (vertices, state), children resolved into ``done``
    done: dict[int, int] = {}
    stack = [(0, np.arange(n))]
    pending: dict[int, tuple[int, int]] = {}
    counter = 1
    while stack:
        key, S = stack.pop()
        if key in pending:
            a, b = pending.pop(key)
            done[key] = builder.merge(done.pop(a), done.pop(b))
            continue
        if S.size == 1:
            done[key] = int(S[0])
            continue
        side = _split(A[np.ix_(S, S)])
        ka, kb = counter, counter + 1
        counter += 2
        pending[key] = (ka, kb)
        stack.append((key, S))
        stack.append((kb, S[~side]))
        stack.append((ka, S[side]))
    return builder.build()
