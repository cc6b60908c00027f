"""Private hierarchical clustering when the blocks are known (DPHCBlocks).

The graph is read exactly once, through the ``k(k-1)/2`` block-pair totals
``w_G(B_i, B_j)``.  Each total gets one Laplace(1/epsilon) draw (adding or
removing an edge moves one total by one), and everything after that is
post-processing: single-linkage merging of blocks on the noisy normalised
similarities, with the merge similarity recorded as the fitted level ``f'``.
"""

from __future__ import annotations

import numpy as np

from .agglomerate import agglomerate
from .dendrogram import Dendrogram, MergeBuilder, random_merges
from .errors import ParameterError, ShapeError
from .graph import WeightedGraph
from .hsbm import GroundTruthTree
from .privacy import sample_laplace


def _check_blocks(n: int, blocks) -> list[np.ndarray]:
    blocks = [np.asarray(b, dtype=np.int64) for b in blocks]
    if not blocks:
        raise ParameterError("need at least one block")
    if any(b.size == 0 for b in blocks):
        raise ParameterError("blocks must be nonempty")
    allv = np.concatenate(blocks)
    if allv.size != n or np.unique(allv).size != n or allv.min() < 0 or allv.max() >= n:
        raise ShapeError("blocks must partition the vertex set")
    return blocks


def block_pair_weights(G: WeightedGraph, blocks) -> np.ndarray:
    """Symmetric ``k x k`` matrix of ``w_G(B_i, B_j)`` (diagonal: internal weight)."""
    blocks = _check_blocks(G.n, blocks)
    k = len(blocks)
    lab = np.empty(G.n, dtype=np.int64)
    for i, b in enumerate(blocks):
        lab[b] = i
    a, b = lab[G.u], lab[G.v]
    W = np.bincount(np.minimum(a, b) * k + np.maximum(a, b), weights=G.w, minlength=k * k).reshape(k, k)
    return W + np.triu(W, 1).T


def dphc_from_weights(pair_weights, blocks, epsilon: float, rng: np.random.Generator, *,
                      noise: bool = True) -> tuple[GroundTruthTree, Dendrogram]:
    """DPHCBlocks given only the block-pair totals; see :func:`dphc_blocks`."""
    if noise and not (epsilon > 0):
        raise ParameterError("epsilon must be positive")
    n = int(sum(len(b) for b in blocks))
    blocks = _check_blocks(n, blocks)
    k = len(blocks)
    sizes = np.array([b.size for b in blocks], dtype=np.float64)
    W = np.asarray(pair_weights, dtype=np.float64)

    builder = MergeBuilder(n)
    node_of = [random_merges(builder, b, rng) for b in blocks]

    iu, ju = np.triu_indices(k, 1)
    totals = W[iu, ju].copy()
    if noise and totals.size:
        totals += sample_laplace(1.0 / epsilon, rng, size=totals.size)
    sim = np.zeros((k, k))
    sim[iu, ju] = totals / (sizes[iu] * sizes[ju])
    sim[ju, iu] = sim[iu, ju]

    parent = np.full(2 * k - 1, -1, dtype=np.int64)
    f = np.full(2 * k - 1, np.nan)
    pnode = list(range(k))
    for t, (i, j, s) in enumerate(agglomerate(sim, "single")):
        new_p = k + t
        parent[pnode[i]] = new_p
        parent[pnode[j]] = new_p
        pnode[i] = new_p
        f[new_p] = s
        node_of[i] = builder.merge(node_of[i], node_of[j])
    fitted = GroundTruthTree(blocks, parent, f, n=n, strict=False)
    return fitted, builder.build()


def dphc_blocks(G: WeightedGraph, blocks, epsilon: float, rng: np.random.Generator, *,
                noise: bool = True) -> tuple[GroundTruthTree, Dendrogram]:
    """Hierarchical clustering of ``G`` given a block partition, epsilon-edge-DP.

    Returns the fitted block tree ``(B, T, f')`` and the leaf-level dendrogram,
    whose within-block parts are uniform random agglomerations.  Noisy
    similarities are not clamped, so ``f'`` can fall outside ``[0, 1]``.
    ``noise=False`` is a test hook that skips the Laplace draws; it gives no
    privacy.
    """
    blocks = _check_blocks(G.n, blocks)
    return dphc_from_weights(block_pair_weights(G, blocks), blocks, epsilon, rng, noise=noise)
