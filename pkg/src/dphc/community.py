"""Private spectral community detection and the end-to-end DPClusterHSBM pipeline.

``dp_community`` follows the split / gap-gate / JL-sketch / Gaussian-noise
recipe line by line.  ``dp_community_simplified`` is the practical variant:
the ``Y x Z1`` block is released with Laplace noise, and the projection of
``Y x Z2`` onto its top-k left singular space gets Gaussian noise for
Frobenius sensitivity 1 (an orthogonal projection never lengthens the
single-entry change).

``dp_cluster_hsbm`` runs one of them ``R = ceil(log2 n)`` times, labels each
round's sample with k-centers, merges labels across rounds with union-find and
finishes with :func:`dphc.blocks.dphc_blocks`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .blocks import dphc_blocks
from .dendrogram import Dendrogram
from .errors import BottomError, ParameterError
from .graph import WeightedGraph
from .hsbm import GroundTruthTree
from .privacy import BudgetLedger, PrivacyBudget, gaussian_sigma, sample_laplace, split_rng

log = logging.getLogger(__name__)


def top_k_basis(M: np.ndarray, k: int) -> np.ndarray:
    """Orthonormal top-k left singular vectors of ``M`` (LAPACK ``gesdd``)."""
    M = np.asarray(M, dtype=np.float64)
    if not (1 <= k <= min(M.shape)):
        raise ParameterError(f"k must lie in 1..{min(M.shape)}, got {k}")
    U, _, _ = np.linalg.svd(M, full_matrices=False)
    return U[:, :k]


def top_k_projection(M: np.ndarray, k: int, target: np.ndarray | None = None) -> np.ndarray:
    """``U_k U_k^T target`` with ``U_k`` from ``M``; ``target`` defaults to ``M``."""
    U = top_k_basis(M, k)
    target = M if target is None else np.asarray(target, dtype=np.float64)
    if target.shape[0] != U.shape[0]:
        raise ParameterError("target must have as many rows as the basis matrix")
    return U @ (U.T @ target)


@dataclass(frozen=True)
class SplitPlan:
    Y: np.ndarray
    Z1: np.ndarray
    Z2: np.ndarray

    @classmethod
    def draw(cls, n: int, rng: np.random.Generator) -> "SplitPlan":
        """``|Y| = floor(n/2)``, ``|Z1| = floor(n/4)``, ``Z2`` takes the rest."""
        perm = rng.permutation(n)
        y, z1 = n // 2, n // 4
        return cls(perm[:y], perm[y : y + z1], perm[y + z1 :])


@dataclass(frozen=True)
class SpectralGate:
    d_tilde: float
    sigma1_tilde: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.d_tilde > self.threshold

    @property
    def gamma_tilde(self) -> float:
        return self.sigma1_tilde / self.d_tilde


@dataclass
class CommunityEmbedding:
    """Noisy column embedding of the ``Z2`` sample, or the refusal sentinel.

    ``public_basis`` and ``public_block`` are present only for the simplified
    variant, where ``Y x Z1`` is itself released; clustering may
    post-process with them.
    """

    columns: np.ndarray | None
    col_index: np.ndarray
    plan: SplitPlan
    gate: SpectralGate | None = None
    public_basis: np.ndarray | None = None
    public_block: np.ndarray | None = None
    noise_sigma: float = 0.0

    @property
    def is_bottom(self) -> bool:
        return self.columns is None

    def points(self, *, denoise: bool = False) -> np.ndarray:
        """One row per ``Z2`` vertex; ``denoise`` maps them into the public basis."""
        if self.is_bottom:
            raise BottomError("embedding is the refusal sentinel")
        X = self.columns
        if denoise and self.public_basis is not None:
            X = self.public_basis.T @ X
        return X.T


def _validate(A_hat: WeightedGraph, k: int, budget: PrivacyBudget) -> np.ndarray:
    if budget.delta <= 0:
        raise ParameterError("community detection needs delta > 0")
    if A_hat.n < 8:
        raise ParameterError("community detection needs n >= 8")
    if k < 1 or k + 1 > A_hat.n // 4:
        raise ParameterError(f"k must satisfy 1 <= k < n/4, got k={k}")
    return A_hat.dense()


def jl_dimension(n: int, delta: float) -> int:
    return int(math.ceil(64.0 * math.log(2.0 * n / delta)))


def dp_community(A_hat: WeightedGraph, k: int, budget: PrivacyBudget, rng: np.random.Generator, *,
                 noise: bool = True) -> CommunityEmbedding:
    """Private spectral embedding of a random quarter of the vertices.

    Sensitivities: each singular value of a block moves by at most 1 when one
    entry flips, so the gap ``sigma_k - sigma_{k+1}`` has sensitivity 2 and
    ``sigma_1`` has 1; both are released with an eps/4 Laplace draw.  The
    sketch gets Gaussian noise scaled to the ``3 k Gamma`` sensitivity bound.

    ``noise=False`` evaluates the same lines at ``epsilon = inf`` (no shifts,
    no draws, the gate only asks for a positive gap).  Not private.
    """
    A = _validate(A_hat, k, budget)
    eps, delta = budget.epsilon, budget.delta
    n = A_hat.n
    plan = SplitPlan.draw(n, rng)
    A1 = A[np.ix_(plan.Y, plan.Z1)]
    A2 = A[np.ix_(plan.Y, plan.Z2)]
    U, s1, _ = np.linalg.svd(A1, full_matrices=False)
    sigma1_A2 = float(np.linalg.norm(A2, 2)) if A2.size else 0.0
    if noise:
        shift = 8.0 / eps * math.log(4.0 / delta)
        d_tilde = float(s1[k - 1] - s1[k] - shift + sample_laplace(8.0 / eps, rng))
        sigma1_tilde = float(sigma1_A2 + 4.0 / eps * math.log(4.0 / delta) + sample_laplace(4.0 / eps, rng))
    else:
        shift, d_tilde, sigma1_tilde = 0.0, float(s1[k - 1] - s1[k]), sigma1_A2
    gate = SpectralGate(d_tilde, sigma1_tilde, 10.0 * shift)
    if not gate.passed:
        return CommunityEmbedding(None, plan.Z2, plan, gate)
    m = jl_dimension(n, delta)
    P = rng.standard_normal((m, plan.Y.size)) / math.sqrt(m)
    Uk = U[:, :k]
    F = P @ (Uk @ (Uk.T @ A2))
    sigma = 3.0 * k * gate.gamma_tilde / eps * math.sqrt(2.0 * math.log(5.0 / delta)) if noise else 0.0
    F_tilde = F + sigma * rng.standard_normal(F.shape) if noise else F
    return CommunityEmbedding(F_tilde, plan.Z2, plan, gate, noise_sigma=sigma)


def dp_community_simplified(A_hat: WeightedGraph, k: int, budget: PrivacyBudget,
                            rng: np.random.Generator, *, noise: bool = True) -> CommunityEmbedding:
    """Laplace-released ``Y x Z1`` block, then a Gaussian-noised top-k projection of ``Y x Z2``.

    Budget: eps/2 for the Laplace release (one entry per edge, sensitivity 1)
    and (eps/2, delta) for the Gaussian release (Frobenius sensitivity 1).
    ``noise=False`` skips both draws (not private).
    """
    A = _validate(A_hat, k, budget)
    plan = SplitPlan.draw(A_hat.n, rng)
    half = budget.scaled(0.5)
    A1 = A[np.ix_(plan.Y, plan.Z1)]
    A2 = A[np.ix_(plan.Y, plan.Z2)]
    A1_tilde = A1 + sample_laplace(1.0 / half.epsilon, rng, size=A1.shape) if noise else A1
    Uk = top_k_basis(A1_tilde, k)
    F_tilde = Uk @ (Uk.T @ A2)
    sigma = 0.0
    if noise:
        sigma = gaussian_sigma(1.0, PrivacyBudget(half.epsilon, budget.delta))
        F_tilde = F_tilde + sigma * rng.standard_normal(F_tilde.shape)
    return CommunityEmbedding(F_tilde, plan.Z2, plan, None, public_basis=Uk, public_block=A1_tilde,
                              noise_sigma=sigma)


def k_centers(points, k: int, rng: np.random.Generator) -> np.ndarray:
    """Gonzalez farthest-point centres from a random start; nearest-centre labels.

    Ties go to the smaller point index (when choosing centres) and to the
    earlier centre (when assigning).  Labels are centre indices ``0..k-1``.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    N = X.shape[0]
    if not (1 <= k <= N):
        raise ParameterError(f"k must lie in 1..{N}, got {k}")
    centers = [int(rng.integers(N))]
    dist = np.linalg.norm(X - X[centers[0]], axis=1)
    while len(centers) < k:
        nxt = int(np.argmax(dist))
        centers.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(X - X[nxt], axis=1))
    D = np.stack([np.linalg.norm(X - X[c], axis=1) for c in centers], axis=1)
    labels = np.argmin(D, axis=1)
    labels[centers] = np.arange(k)
    return labels


class UnionFind:
    def __init__(self, n: int):
        self.parent = np.arange(n)
        self.rank = np.zeros(n, dtype=np.int64)

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return int(root)

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return ra


@dataclass
class RoundResult:
    embedding: CommunityEmbedding
    labels: np.ndarray | None  # round-local k-centers labels over embedding.col_index
    points: np.ndarray | None


@dataclass
class ClusterHSBMResult:
    tree: Dendrogram
    fitted: GroundTruthTree
    blocks: list[np.ndarray]
    rounds: list[RoundResult]
    ledger: BudgetLedger
    unsampled: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def _components(n: int, rounds: list[RoundResult]) -> tuple[np.ndarray, np.ndarray]:
    uf = UnionFind(n)
    sampled = np.zeros(n, dtype=bool)
    for r in rounds:
        if r.labels is None:
            continue
        ids = r.embedding.col_index
        sampled[ids] = True
        for c in np.unique(r.labels):
            members = ids[r.labels == c]
            for v in members[1:]:
                uf.union(int(members[0]), int(v))
    comp = np.full(n, -1, dtype=np.int64)
    roots = {}
    for v in np.flatnonzero(sampled):
        comp[v] = roots.setdefault(uf.find(int(v)), len(roots))
    return comp, sampled


def _cluster_distance(a: int, b: int, comp: np.ndarray, rounds: list[RoundResult]) -> float:
    for r in reversed(rounds):
        if r.points is None:
            continue
        lab = comp[r.embedding.col_index]
        ia, ib = lab == a, lab == b
        if ia.any() and ib.any():
            return float(np.linalg.norm(r.points[ia].mean(0) - r.points[ib].mean(0)))
    return math.inf


def _reconcile(comp: np.ndarray, k: int, rounds: list[RoundResult]) -> np.ndarray:
    comp = comp.copy()
    while True:
        ids = [c for c in np.unique(comp) if c >= 0]
        if len(ids) <= k:
            return comp
        best, pair = math.inf, None
        for x in range(len(ids)):
            for y in range(x + 1, len(ids)):
                d = _cluster_distance(ids[x], ids[y], comp, rounds)
                if d < best:
                    best, pair = d, (ids[x], ids[y])
        if pair is None:
            # never co-sampled: merge the two smallest components
            sizes = sorted(ids, key=lambda c: (np.sum(comp == c), c))
            pair = (sizes[0], sizes[1])
        comp[comp == pair[1]] = pair[0]


def _assign_unsampled(comp: np.ndarray, rounds: list[RoundResult]) -> np.ndarray:
    """Place never-sampled vertices using only released round data.

    With a public ``Y x Z1`` block, each such vertex goes to the cluster into
    which its noisy adjacency (averaged per labelled partner) is largest.
    Otherwise, or without any evidence, it joins the largest cluster.
    """
    comp = comp.copy()
    missing = np.flatnonzero(comp < 0)
    if missing.size == 0:
        return comp
    labels = [c for c in np.unique(comp) if c >= 0]
    if not labels:
        return comp
    n = comp.size
    score = np.zeros((n, len(labels)))
    count = np.zeros((n, len(labels)))
    col = {c: t for t, c in enumerate(labels)}
    lab_idx = np.array([col.get(int(c), -1) for c in comp])
    for r in rounds:
        B = r.embedding.public_block
        if B is None:
            continue
        plan = r.embedding.plan
        for rows, cols, M in ((plan.Y, plan.Z1, B), (plan.Z1, plan.Y, B.T)):
            partner = lab_idx[cols]
            ok = partner >= 0
            if not ok.any():
                continue
            onehot = np.zeros((ok.sum(), len(labels)))
            onehot[np.arange(ok.sum()), partner[ok]] = 1.0
            score[rows] += M[:, ok] @ onehot
            count[rows] += onehot.sum(0)
    largest = max(labels, key=lambda c: (np.sum(comp == c), -c))
    for v in missing:
        if count[v].sum() > 0:
            with np.errstate(invalid="ignore", divide="ignore"):
                avg = np.where(count[v] > 0, score[v] / count[v], -np.inf)
            comp[v] = labels[int(np.argmax(avg))]
        else:
            comp[v] = largest
    return comp


def dp_cluster_hsbm(A_hat: WeightedGraph, k: int, budget: PrivacyBudget, rng: np.random.Generator, *,
                    simplified: bool = False, denoise: bool = False,
                    rounds: int | None = None, noise: bool = True) -> ClusterHSBMResult:
    """End-to-end private hierarchical clustering for HSBM-like graphs.

    Budget: ``R = ceil(log2 n)`` community rounds at ``(eps/(2R), delta/(2R))``
    each and a final ``(eps/2, 0)`` block-tree fit, composed sequentially.
    ``rounds`` overrides ``R`` (the split stays ``eps/(2R)``).  ``denoise``
    clusters simplified-variant embeddings in their public top-k basis, a
    post-processing step.  Rounds that refuse still count as spent.
    Raises :class:`BottomError` when every round refuses.  ``noise=False``
    turns off every draw in every stage (the non-private reference run).
    """
    n = A_hat.n
    R = int(math.ceil(math.log2(n))) if rounds is None else int(rounds)
    if R < 1:
        raise ParameterError("need at least one community round")
    ledger = BudgetLedger(budget)
    per_round = PrivacyBudget(budget.epsilon / (2 * R), budget.delta / (2 * R))
    detect = dp_community_simplified if simplified else dp_community
    streams = split_rng(rng, R + 1)
    results: list[RoundResult] = []
    for i in range(R):
        ledger.spend(f"community round {i}", per_round)
        emb = detect(A_hat, k, per_round, streams[i], noise=noise)
        if emb.is_bottom:
            log.info("round %d refused (gap estimate %.3g <= %.3g)", i, emb.gate.d_tilde, emb.gate.threshold)
            results.append(RoundResult(emb, None, None))
            continue
        pts = emb.points(denoise=denoise)
        labels = k_centers(pts, k, streams[i])
        results.append(RoundResult(emb, labels, pts))
    if all(r.labels is None for r in results):
        raise BottomError("every community round returned the refusal sentinel")
    comp, sampled = _components(n, results)
    comp = _reconcile(comp, k, results)
    comp = _assign_unsampled(comp, results)
    ids = np.unique(comp)
    blocks = [np.flatnonzero(comp == c) for c in ids]
    final = ledger.spend("block tree", PrivacyBudget(budget.epsilon / 2, 0.0))
    fitted, tree = dphc_blocks(A_hat, blocks, final.epsilon, streams[R], noise=noise)
    return ClusterHSBMResult(tree, fitted, blocks, results, ledger, np.flatnonzero(~sampled))


def write_embedding(emb: CommunityEmbedding, path) -> None:
    """CSV dump, one row per sampled vertex: id then coordinates; ``#BOT`` for the sentinel."""
    p = Path(path)
    if emb.is_bottom:
        p.write_text("#BOT\n", encoding="utf-8")
        return
    lines = []
    for vid, row in zip(emb.col_index.tolist(), emb.columns.T):
        lines.append(",".join([str(vid)] + [repr(float(x)) for x in row]))
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_embedding(path) -> tuple[np.ndarray, np.ndarray] | None:
    """Inverse of :func:`write_embedding`; ``None`` for the sentinel."""
    text = Path(path).read_text(encoding="utf-8")
    if text.startswith("#BOT"):
        return None
    rows = [ln.split(",") for ln in text.splitlines() if ln.strip()]
    ids = np.array([int(r[0]) for r in rows], dtype=np.int64)
    cols = np.array([[float(x) for x in r[1:]] for r in rows]).T
    return ids, cols
