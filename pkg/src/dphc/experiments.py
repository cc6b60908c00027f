"""Algorithm dispatch, run records and sweeps shared by the CLI and scripts.

Every algorithm sees the private graph only through its own mechanism; the
``cost`` field of a record is evaluated afterwards against the input graph
and is marked evaluation-only.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .baselines import best_linkage_cost, laplace_sanitize, linkage_tree, sparse_cut_tree
from .community import dp_cluster_hsbm
from .dendrogram import Dendrogram, dasgupta_cost, random_tree
from .errors import BottomError, ParameterError
from .exponential import MAX_ENUM_LEAVES, exponential_mechanism_tree, optimal_tree
from .graph import WeightedGraph, read_graph
from .privacy import PrivacyBudget, derive_rng

ALGOS = ("dpcluster", "dpcluster-simplified", "linkage", "sparsecut", "random", "expmech")
DEFAULT_DELTA = 1e-6
REFERENCE_STREAM = 1 << 20  # rng path component reserved for the random-tree reference


@dataclass
class RunSpec:
    algo: str
    epsilon: float = math.inf  # inf only together with no_privacy (or for algorithms that ignore G)
    delta: float = DEFAULT_DELTA
    k: int = 4
    seed: int = 0
    no_privacy: bool = False
    linkage_mode: str = "best"
    denoise: bool = False

    def validate(self) -> None:
        if self.algo not in ALGOS:
            raise ParameterError(f"unknown algorithm {self.algo!r}; expected one of {ALGOS}")
        if self.algo == "random":
            return
        if math.isinf(self.epsilon) and not self.no_privacy:
            raise ParameterError("epsilon=inf needs --no-privacy")
        if not self.no_privacy and not self.epsilon > 0:
            raise ParameterError("epsilon must be positive")
        if not (0 <= self.delta < 1):
            raise ParameterError("delta must lie in [0, 1)")
        if self.k < 1:
            raise ParameterError("k must be positive")
        if self.algo.startswith("dpcluster") and not self.delta > 0:
            raise ParameterError("community detection needs delta > 0")


@dataclass
class RunRecord:
    dataset: str
    algo: str
    epsilon: float | str
    delta: float
    k: int
    seed: int
    cost: float | None
    runtime_ms: float
    status: str
    no_privacy: bool = False
    evaluation_only: list = field(default_factory=lambda: ["cost"])
    info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def _fmt_eps(spec: RunSpec) -> float | str:
    if spec.algo == "random" or spec.no_privacy or math.isinf(spec.epsilon):
        return "inf"
    return float(spec.epsilon)


def run_algorithm(G: WeightedGraph, spec: RunSpec, rng: np.random.Generator) -> tuple[Dendrogram | None, str, dict]:
    """Run one algorithm; returns ``(tree or None, status, info)``.

    ``status`` is ``"ok"`` or ``"bot"`` (every community round refused).
    """
    spec.validate()
    noise = not spec.no_privacy
    info: dict = {}
    if spec.algo == "random":
        return random_tree(G.n, rng), "ok", info
    if spec.algo == "expmech":
        if noise:
            return exponential_mechanism_tree(G, spec.epsilon, rng), "ok", info
        # the epsilon -> inf limit of the mechanism is the exact optimum
        return optimal_tree(G, limit=MAX_ENUM_LEAVES)[0], "ok", info
    if spec.algo in ("linkage", "sparsecut"):
        Gs = laplace_sanitize(G, spec.epsilon, rng) if noise else G
        if spec.algo == "sparsecut":
            return sparse_cut_tree(Gs), "ok", info
        if spec.linkage_mode == "best":
            # choosing the best mode reads G: an evaluation step, not part of the release
            T, _, mode = best_linkage_cost(G, Gs)
            info["linkage_mode"] = mode
            return T, "ok", info
        return linkage_tree(Gs, spec.linkage_mode), "ok", info
    budget = PrivacyBudget(spec.epsilon if noise else 1.0, spec.delta)
    try:
        res = dp_cluster_hsbm(G, spec.k, budget, rng, simplified=spec.algo == "dpcluster-simplified",
                              denoise=spec.denoise, noise=noise)
    except BottomError:
        return None, "bot", info
    info["blocks"] = len(res.blocks)
    info["refused_rounds"] = sum(r.labels is None for r in res.rounds)
    info["spent_epsilon"] = res.ledger.spent_epsilon
    info["spent_delta"] = res.ledger.spent_delta
    return res.tree, "ok", info


def execute(G: WeightedGraph, spec: RunSpec, rng: np.random.Generator, dataset: str = "graph"):
    t0 = time.perf_counter()
    tree, status, info = run_algorithm(G, spec, rng)
    ms = (time.perf_counter() - t0) * 1000.0
    cost = dasgupta_cost(G, tree) if tree is not None else None
    rec = RunRecord(dataset, spec.algo, _fmt_eps(spec), spec.delta, spec.k, spec.seed, cost, ms, status,
                    spec.no_privacy, info=info)
    return tree, rec


# -- sweeps ----------------------------------------------------------------------


@dataclass
class SweepConfig:
    graphs: list
    algos: list
    epsilons: list
    seeds: list
    k: int = 4
    delta: float = DEFAULT_DELTA
    parallelism: int = 1
    base_dir: str = "."

    @classmethod
    def load(cls, path) -> "SweepConfig":
        p = Path(path)
        data = json.loads(p.read_text(encoding="utf-8"))
        missing = {"graphs", "algos", "epsilons", "seeds"} - data.keys()
        if missing:
            raise ParameterError(f"sweep config is missing {sorted(missing)}")
        unknown = data.keys() - {"graphs", "algos", "epsilons", "seeds", "k", "delta", "parallelism"}
        if unknown:
            raise ParameterError(f"unknown sweep config keys {sorted(unknown)}")
        cfg = cls(**data, base_dir=str(p.parent))
        for a in cfg.algos:
            if a not in ALGOS:
                raise ParameterError(f"unknown algorithm {a!r}")
        return cfg

    def epsilon_values(self) -> list[float]:
        out = []
        for e in self.epsilons:
            v = math.inf if (isinstance(e, str) and e.lower() == "inf") else float(e)
            if not v > 0:
                raise ParameterError("sweep epsilons must be positive or 'inf'")
            out.append(v)
        return out

    def graph_path(self, g: str) -> Path:
        p = Path(g)
        return p if p.is_absolute() else Path(self.base_dir) / p


ROW_FIELDS = ["row_type", "graph", "algo", "epsilon", "seed", "k", "delta", "no_privacy", "status",
              "cost", "cost_std", "reduction_vs_random", "reduction_std", "count"]


@lru_cache(maxsize=4)
def _load_graph(path: str) -> WeightedGraph:
    return read_graph(path)


def _row_task(args):
    gi, path, ai, algo, ei, eps, seed, k, delta = args
    G = _load_graph(path)
    spec = RunSpec(algo, eps, delta, k, seed, no_privacy=math.isinf(eps) and algo != "random")
    rng = derive_rng(seed, gi, ai, ei)
    try:
        _, rec = execute(G, spec, rng, Path(path).stem)
    except Exception as exc:  # recorded per row; the sweep continues
        rec = RunRecord(Path(path).stem, algo, _fmt_eps(spec), delta, k, seed, None, 0.0,
                        f"error: {type(exc).__name__}: {exc}", spec.no_privacy)
    return (gi, ai, ei, seed), rec


def run_sweep(cfg: SweepConfig):
    """Returns ``(rows, timings)``; rows are deterministic, timings are not."""
    eps_values = cfg.epsilon_values()
    tasks = []
    for gi, g in enumerate(cfg.graphs):
        path = str(cfg.graph_path(g))
        for ai, algo in enumerate(cfg.algos):
            grid = [(0, math.inf)] if algo == "random" else list(enumerate(eps_values))
            for ei, eps in grid:
                for seed in cfg.seeds:
                    tasks.append((gi, path, ai, algo, ei, eps, int(seed), cfg.k, cfg.delta))
    if cfg.parallelism > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as ex:
            results = list(ex.map(_row_task, tasks))
    else:
        results = [_row_task(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    # random-tree reference per graph (computed even when "random" is not swept)
    ref = {}
    for gi, g in enumerate(cfg.graphs):
        path = str(cfg.graph_path(g))
        G = _load_graph(path)
        costs = [dasgupta_cost(G, random_tree(G.n, derive_rng(int(s), gi, REFERENCE_STREAM))) for s in cfg.seeds]
        ref[gi] = float(np.mean(costs))
    rows, timings = [], []
    cells: dict = {}
    for (gi, ai, ei, seed), rec in results:
        red = None if rec.cost is None else 1.0 - rec.cost / ref[gi]
        rows.append({"row_type": "run", "graph": rec.dataset, "algo": rec.algo, "epsilon": rec.epsilon,
                     "seed": seed, "k": rec.k, "delta": rec.delta, "no_privacy": rec.no_privacy,
                     "status": rec.status, "cost": rec.cost, "cost_std": None,
                     "reduction_vs_random": red, "reduction_std": None, "count": 1})
        timings.append({"graph": rec.dataset, "algo": rec.algo, "epsilon": rec.epsilon, "seed": seed,
                        "runtime_ms": rec.runtime_ms})
        cells.setdefault((gi, ai, ei), []).append(rows[-1])
    for key in sorted(cells):
        group = cells[key]
        ok = [r for r in group if r["cost"] is not None]
        c = np.array([r["cost"] for r in ok], dtype=float)
        rd = np.array([r["reduction_vs_random"] for r in ok], dtype=float)
        first = group[0]
        rows.append({"row_type": "summary", "graph": first["graph"], "algo": first["algo"],
                     "epsilon": first["epsilon"], "seed": "", "k": first["k"], "delta": first["delta"],
                     "no_privacy": first["no_privacy"], "status": "ok" if len(ok) == len(group) else "partial",
                     "cost": float(c.mean()) if c.size else None, "cost_std": float(c.std()) if c.size else None,
                     "reduction_vs_random": float(rd.mean()) if rd.size else None,
                     "reduction_std": float(rd.std()) if rd.size else None, "count": len(ok)})
    return rows, timings


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows, fields=None) -> str:
    fields = fields or ROW_FIELDS
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_cell(r.get(f)) for f in fields])
    return buf.getvalue()
