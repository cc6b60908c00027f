"""Generic similarity-based agglomeration shared by linkage and block merging."""

from __future__ import annotations

import numpy as np

from .errors import ParameterError

MODES = ("single", "complete", "average")


def agglomerate(S, mode: str = "single", sizes=None) -> list[tuple[int, int, float]]:
    """Greedily merge the most similar pair of clusters until one remains.

    ``S`` is a symmetric similarity matrix over initial clusters.  Cluster
    similarity after a merge is the max (single), min (complete) or
    size-weighted mean (average) of the two parts.  Among equal similarities
    the lexicographically smallest pair of representatives wins, where a
    cluster's representative is its smallest initial index.

    Returns ``(i, j, sim)`` per merge with ``i < j``; the merged cluster keeps
    representative ``i``.  Runs in roughly quadratic time by caching each
    row's best partner.
    """
    if mode not in MODES:
        raise ParameterError(f"unknown linkage mode {mode!r}; expected one of {MODES}")
    S = np.array(S, dtype=np.float64, copy=True)
    k = S.shape[0]
    if S.shape != (k, k):
        raise ParameterError("similarity matrix must be square")
    sz = np.ones(k) if sizes is None else np.asarray(sizes, dtype=np.float64).copy()
    np.fill_diagonal(S, -np.inf)
    active = np.ones(k, dtype=bool)
    rowmax = S.max(axis=1) if k > 1 else np.full(k, -np.inf)
    rowarg = S.argmax(axis=1) if k > 1 else np.zeros(k, dtype=np.int64)
    merges = []
    for _ in range(k - 1):
        i = int(np.argmax(rowmax))
        j = int(rowarg[i])
        sim = float(rowmax[i])
        merges.append((i, j, sim))
        if mode == "single":
            new = np.maximum(S[i], S[j])
        elif mode == "complete":
            new = np.minimum(S[i], S[j])
        else:
            with np.errstate(invalid="ignore"):
                new = (sz[i] * S[i] + sz[j] * S[j]) / (sz[i] + sz[j])
        active[j] = False
        new[~active] = -np.inf
        new[i] = -np.inf
        S[i, :] = new
        S[:, i] = new
        S[j, :] = -np.inf
        S[:, j] = -np.inf
        sz[i] += sz[j]
        rowmax[j] = -np.inf
        need = active & ((rowarg == i) | (rowarg == j))
        need[i] = True
        others = active & ~need
        better = others & ((new > rowmax) | ((new == rowmax) & (i < rowarg)))
        rowmax[better] = new[better]
        rowarg[better] = i
        idx = np.flatnonzero(need)
        sub = S[idx]
        rowmax[idx] = sub.max(axis=1)
        rowarg[idx] = sub.argmax(axis=1)
    return merges
