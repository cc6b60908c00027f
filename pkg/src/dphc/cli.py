"""Command-line entry point: ``dphc generate|run|sweep|verify-lowerbound|certify-cuts``.

Exit codes: 0 success, 2 parameter or input error, 3 refusal (bot) or
partial failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import experiments as ex
from .baselines import certify_cut_approx, laplace_sanitize
from .dendrogram import random_tree
from .errors import BottomError, ParameterError
from .graph import knn_graph, read_graph, read_points, write_graph
from .hsbm import experiment_model, planted_partition, sample_graph
from .lowerbound import packing_experiment, sample_pentagon_graph, splitting_tree, verify_miss_cost_bound, write_report
from .privacy import derive_rng

EXIT_OK, EXIT_PARAM, EXIT_PARTIAL = 0, 2, 3

log = logging.getLogger("dphc")


def _epsilon(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid epsilon {text!r}") from None


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = derive_rng(args.seed, 0)
    if args.kind == "hsbm":
        M = experiment_model(args.n, args.k, rng)
        G = sample_graph(M, derive_rng(args.seed, 1))
        M.save(out / "model.json")
        labels = M.block_of
    elif args.kind == "planted":
        sizes = [args.n // args.k + (i < args.n % args.k) for i in range(args.k)]
        M = planted_partition(sizes, args.p, args.q, rng)
        G = sample_graph(M, derive_rng(args.seed, 1))
        M.save(out / "model.json")
        labels = M.block_of
    elif args.kind == "pentagon":
        PG = sample_pentagon_graph(args.n, rng)
        G = PG.graph
        _write_json(out / "cycles.json", [c.tolist() for c in PG.cycles])
        labels = PG.cycle_of()
    else:
        if not args.points:
            raise ParameterError("knn generation needs --points")
        P = read_points(args.points, label_column=args.label_column)
        G = knn_graph(P, args.knn)
        labels = P.labels
    write_graph(G, out / "graph.txt")
    if labels is not None:
        (out / "labels.txt").write_text("\n".join(str(int(x)) for x in labels) + "\n", encoding="utf-8")
    print(json.dumps({"kind": args.kind, "n": G.n, "m": G.m, "out": str(out)}))
    return EXIT_OK


def cmd_run(args) -> int:
    G = read_graph(args.graph)
    spec = ex.RunSpec(args.algo, args.epsilon, args.delta, args.k, args.seed, args.no_privacy,
                      args.linkage_mode, args.denoise)
    tree, rec = ex.execute(G, spec, derive_rng(args.seed, 0), args.dataset or Path(args.graph).stem)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if tree is not None:
        (out / "tree.nwk").write_text(tree.to_newick() + "\n", encoding="utf-8")
    _write_json(out / "result.json", rec.to_json())
    print(json.dumps(rec.to_json(), sort_keys=True))
    return EXIT_OK if rec.status == "ok" else EXIT_PARTIAL


def cmd_sweep(args) -> int:
    cfg = ex.SweepConfig.load(args.config)
    rows, timings = ex.run_sweep(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(ex.rows_to_csv(rows), encoding="utf-8")
    timing_path = out.with_suffix(".timing.csv")
    timing_path.write_text(ex.rows_to_csv(timings, ["graph", "algo", "epsilon", "seed", "runtime_ms"]),
                           encoding="utf-8")
    bad = [r for r in rows if r["row_type"] == "run" and r["status"] != "ok"]
    print(json.dumps({"rows": len(rows), "failed": len(bad), "out": str(out), "timings": str(timing_path)}))
    return EXIT_PARTIAL if bad else EXIT_OK


def cmd_verify_lowerbound(args) -> int:
    rng = derive_rng(args.seed, 0)
    by_n = {}
    for n in args.n:
        checks = violations = 0
        slack = math.inf
        for _ in range(args.trials):
            PG = sample_pentagon_graph(n, rng)
            for T in (random_tree(n, rng), splitting_tree(PG, rng)):
                rep = verify_miss_cost_bound(PG, T)
                checks += 1
                violations += not rep.passed
                slack = min(slack, rep.slack)
        by_n[str(n)] = {"checks": checks, "violations": violations, "min_slack": slack}
    report = packing_experiment(args.packing_n, args.pairs, derive_rng(args.seed, 1))
    report["miss_bound_by_n"] = by_n
    report["miss_bound_violations"] += sum(v["violations"] for v in by_n.values())
    write_report(report, Path(args.out))
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK if report["miss_bound_violations"] == 0 else EXIT_PARTIAL


def cmd_certify_cuts(args) -> int:
    G = read_graph(args.graph)
    if args.sanitized:
        G2 = read_graph(args.sanitized)
    elif args.epsilon is not None and math.isfinite(args.epsilon):
        G2 = laplace_sanitize(G, args.epsilon, derive_rng(args.seed, 0))
    else:
        raise ParameterError("certify-cuts needs --sanitized or a finite --epsilon")
    alpha, beta = certify_cut_approx(G, G2, args.samples, derive_rng(args.seed, 1))
    rec = {"n": G.n, "alpha": alpha, "beta": beta, "exhaustive": G.n <= 16,
           "samples": None if G.n <= 16 else args.samples}
    _write_json(Path(args.out), rec)
    print(json.dumps(rec, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dphc", description="Private hierarchical clustering experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic or k-NN graph")
    g.add_argument("--kind", choices=["hsbm", "planted", "pentagon", "knn"], default="hsbm")
    g.add_argument("--n", type=int, default=2048)
    g.add_argument("--k", type=int, default=4)
    g.add_argument("--p", type=float, default=0.9, help="planted: within-block probability")
    g.add_argument("--q", type=float, default=0.05, help="planted: between-block probability")
    g.add_argument("--points", help="knn: CSV of points")
    g.add_argument("--knn", type=int, default=120)
    g.add_argument("--label-column", action="store_true")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run one algorithm on a graph file")
    r.add_argument("--algo", choices=ex.ALGOS, required=True)
    r.add_argument("--graph", required=True)
    r.add_argument("--epsilon", type=_epsilon, default=math.inf)
    r.add_argument("--delta", type=float, default=ex.DEFAULT_DELTA)
    r.add_argument("--k", type=int, default=4)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--no-privacy", action="store_true", help="disable all noise; the record is watermarked")
    r.add_argument("--linkage-mode", choices=["best", "single", "complete", "average"], default="best")
    r.add_argument("--denoise", action="store_true", help="simplified variant: cluster in the public basis")
    r.add_argument("--dataset")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="grid over graphs, algorithms, epsilons and seeds")
    s.add_argument("config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify-lowerbound", help="pentagon-family checks and the packing probe")
    v.add_argument("--n", type=int, nargs="+", default=[25, 50, 100])
    v.add_argument("--trials", type=int, default=50)
    v.add_argument("--packing-n", type=int, default=20)
    v.add_argument("--pairs", type=int, default=10)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_verify_lowerbound)

    c = sub.add_parser("certify-cuts", help="empirical (alpha, beta) cut approximation")
    c.add_argument("--graph", required=True)
    c.add_argument("--sanitized")
    c.add_argument("--epsilon", type=_epsilon)
    c.add_argument("--samples", type=int, default=2000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_certify_cuts)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_PARAM if e.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BottomError as e:
        print(f"dphc: refused: {e}", file=sys.stderr)
        return EXIT_PARTIAL
    except (ValueError, OSError, json.JSONDecodeError) as e:
        print(f"dphc: error: {e}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
