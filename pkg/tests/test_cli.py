import json
import math

import pytest

from dphc.cli import main
from dphc.graph import WeightedGraph, read_graph, write_graph


@pytest.fixture
def hsbm_dir(tmp_path):
    out = tmp_path / "g"
    assert main(["generate", "--kind", "hsbm", "--n", "64", "--k", "4", "--seed", "3", "--out", str(out)]) == 0
    return out


def read_result(path):
    return json.loads((path / "result.json").read_text())


def test_generate_outputs(hsbm_dir, tmp_path):
    assert {p.name for p in hsbm_dir.iterdir()} == {"graph.txt", "model.json", "labels.txt"}
    assert read_graph(hsbm_dir / "graph.txt").n == 64
    assert len((hsbm_dir / "labels.txt").read_text().split()) == 64
    out = tmp_path / "p"
    assert main(["generate", "--kind", "pentagon", "--n", "25", "--out", str(out)]) == 0
    assert len(json.loads((out / "cycles.json").read_text())) == 5


def test_generate_is_seeded(tmp_path):
    for d in ("a", "b"):
        main(["generate", "--n", "40", "--k", "2", "--seed", "1", "--out", str(tmp_path / d)])
    assert (tmp_path / "a" / "graph.txt").read_bytes() == (tmp_path / "b" / "graph.txt").read_bytes()


@pytest.mark.parametrize("algo", ["linkage", "sparsecut", "random", "dpcluster-simplified"])
def test_run_algorithms(hsbm_dir, tmp_path, algo):
    out = tmp_path / algo
    code = main(["run", "--algo", algo, "--graph", str(hsbm_dir / "graph.txt"), "--epsilon", "2", "--out", str(out)])
    assert code == 0
    rec = read_result(out)
    assert rec["status"] == "ok" and rec["evaluation_only"] == ["cost"]
    assert (out / "tree.nwk").exists()


def test_no_privacy_watermark(hsbm_dir, tmp_path):
    g = str(hsbm_dir / "graph.txt")
    assert main(["run", "--algo", "sparsecut", "--graph", g, "--epsilon", "inf", "--out", str(tmp_path / "x")]) == 2
    assert main(["run", "--algo", "sparsecut", "--graph", g, "--epsilon", "inf", "--no-privacy",
                 "--out", str(tmp_path / "y")]) == 0
    rec = read_result(tmp_path / "y")
    assert rec["no_privacy"] is True and rec["epsilon"] == "inf"


def test_parameter_errors(hsbm_dir, tmp_path):
    g = str(hsbm_dir / "graph.txt")
    assert main(["run", "--algo", "nope", "--graph", g, "--out", str(tmp_path / "a")]) == 2
    assert main(["run", "--algo", "linkage", "--graph", g, "--epsilon", "-1", "--out", str(tmp_path / "b")]) == 2
    assert main(["run", "--algo", "dpcluster", "--graph", g, "--epsilon", "1", "--delta", "0",
                 "--out", str(tmp_path / "c")]) == 2
    assert main(["run", "--algo", "expmech", "--graph", g, "--epsilon", "1", "--out", str(tmp_path / "d")]) == 2
    assert main(["run", "--algo", "linkage", "--graph", str(tmp_path / "missing.txt"), "--epsilon", "1",
                 "--out", str(tmp_path / "e")]) == 2
    assert main(["generate", "--n", "63", "--k", "3", "--out", str(tmp_path / "f")]) == 2


def test_bottom_exit_code(tmp_path):
    write_graph(WeightedGraph.empty(64), tmp_path / "empty.txt")
    code = main(["run", "--algo", "dpcluster", "--graph", str(tmp_path / "empty.txt"), "--epsilon", "1",
                 "--k", "2", "--out", str(tmp_path / "r")])
    assert code == 3
    rec = read_result(tmp_path / "r")
    assert rec["status"] == "bot" and rec["cost"] is None
    assert not (tmp_path / "r" / "tree.nwk").exists()


def test_expmech_small(tmp_path):
    G = WeightedGraph.from_edges(6, [(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0)])
    write_graph(G, tmp_path / "g.txt")
    assert main(["run", "--algo", "expmech", "--graph", str(tmp_path / "g.txt"), "--epsilon", "1",
                 "--out", str(tmp_path / "r")]) == 0


def test_sweep_is_byte_identical(hsbm_dir, tmp_path):
    cfg = {"graphs": [str(hsbm_dir / "graph.txt")], "algos": ["random", "linkage", "sparsecut"],
           "epsilons": [1.0, "inf"], "seeds": [0, 1], "k": 4}
    (tmp_path / "sweep.json").write_text(json.dumps(cfg))
    for name in ("a.csv", "b.csv"):
        assert main(["sweep", str(tmp_path / "sweep.json"), "--out", str(tmp_path / name)]) == 0
    a = (tmp_path / "a.csv").read_text()
    assert a == (tmp_path / "b.csv").read_text()
    assert (tmp_path / "a.timing.csv").exists()
    header = a.splitlines()[0].split(",")
    assert "runtime_ms" not in header and "reduction_vs_random" in header
    # 2 random rows + 2 algos x 2 eps x 2 seeds, plus 5 summary rows
    assert len(a.splitlines()) == 1 + 2 + 8 + 5


def test_sweep_config_errors(tmp_path):
    (tmp_path / "bad.json").write_text(json.dumps({"graphs": [], "algos": ["x"], "epsilons": [1], "seeds": [0]}))
    assert main(["sweep", str(tmp_path / "bad.json"), "--out", str(tmp_path / "o.csv")]) == 2
    (tmp_path / "bad2.json").write_text("{not json")
    assert main(["sweep", str(tmp_path / "bad2.json"), "--out", str(tmp_path / "o.csv")]) == 2


def test_verify_lowerbound(tmp_path):
    out = tmp_path / "lb.json"
    assert main(["verify-lowerbound", "--n", "25", "50", "--trials", "3", "--packing-n", "10", "--pairs", "2",
                 "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["miss_bound_violations"] == 0 and set(rep["miss_bound_by_n"]) == {"25", "50"}


def test_certify_cuts(hsbm_dir, tmp_path):
    G = WeightedGraph.from_edges(8, [(i, (i + 1) % 8, 1.0) for i in range(8)])
    write_graph(G, tmp_path / "c8.txt")
    assert main(["certify-cuts", "--graph", str(tmp_path / "c8.txt"), "--epsilon", "1",
                 "--out", str(tmp_path / "c.json")]) == 0
    rec = json.loads((tmp_path / "c.json").read_text())
    assert rec["exhaustive"] is True and math.isfinite(rec["beta"])
    assert main(["certify-cuts", "--graph", str(tmp_path / "c8.txt"), "--sanitized", str(tmp_path / "c8.txt"),
                 "--out", str(tmp_path / "d.json")]) == 0
    assert json.loads((tmp_path / "d.json").read_text())["alpha"] == 0.0
    assert main(["certify-cuts", "--graph", str(tmp_path / "c8.txt"), "--out", str(tmp_path / "e.json")]) == 2
