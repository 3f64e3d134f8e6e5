from __future__ import annotations

import json
import subprocess
import sys

import pytest

from sharpbounds.cli import EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, main
from sharpbounds.harness import SCENARIOS, dump_dgp, load_scenario, population_evidence, sample

from .conftest import IV_TEXT


def _evidence_json(ev) -> str:
    t = ev.tables[0]
    return json.dumps({", ".join(f"{v}={x}" for v, x in c): float(p) for c, p in zip(t.cells, t.probs)})


@pytest.fixture()
def iv_files(tmp_path):
    sc = load_scenario("iv_exclusion")
    (tmp_path / "graph.txt").write_text(sc.graph_text)
    (tmp_path / "evidence.json").write_text(_evidence_json(population_evidence(sc.dgp)))
    (tmp_path / "query.txt").write_text("ATE(X, Y)\n")
    (tmp_path / "assumptions.txt").write_text("\n".join(sc.assumptions) + "\n")
    return tmp_path


def _bound_args(d, *extra):
    return [
        "bound",
        "--graph", str(d / "graph.txt"),
        "--evidence", str(d / "evidence.json"),
        "--query", str(d / "query.txt"),
        *extra,
    ]


def test_bound_writes_json(iv_files, capsys):
    assert main(_bound_args(iv_files)) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["status"] == "sharp"
    b = doc["bounds"]
    assert b["primal_lo"] == pytest.approx(-0.4451, abs=1e-4)
    assert b["dual_lo"] <= b["primal_lo"] <= b["primal_hi"] <= b["dual_hi"]
    for key in ("theta", "epsilon", "iterations", "wall_ms", "config_echo"):
        assert key in doc


def test_bound_with_progress_and_confidence(iv_files, tmp_path):
    ev = sample(load_scenario("iv_exclusion").dgp, 1000, 0)
    t = ev.tables[0]
    counts = {", ".join(f"{v}={x}" for v, x in c): n for c, n in zip(t.cells, t.counts)}
    (iv_files / "counts.json").write_text(json.dumps(counts))
    out, prog = tmp_path / "out.json", tmp_path / "progress.csv"
    args = [
        "bound", "--graph", str(iv_files / "graph.txt"), "--evidence", str(iv_files / "counts.json"),
        "--query", str(iv_files / "query.txt"), "--ci-method", "kl", "--eps-thresh", "1e-2",
        "--out", str(out), "--progress", str(prog),
    ]
    assert main(args) == EXIT_OK
    doc = json.loads(out.read_text())
    est = doc["estimated"]["bounds"]
    assert doc["bounds"]["dual_lo"] <= est["primal_lo"] + 1e-7
    assert est["primal_hi"] <= doc["bounds"]["dual_hi"] + 1e-7
    lines = prog.read_text().splitlines()
    assert lines[0].startswith("iter,wall_ms,dual_lo")
    assert len(lines) >= 2


def test_infeasible_exit_code(tmp_path, capsys):
    (tmp_path / "g.txt").write_text("X -> Y\ncard: X=2, Y=2")
    (tmp_path / "e.json").write_text('{"statements": ["P(Y=1) = 0.5", "P(Y(X=0)=1, Y(X=1)=1) = 0.7"]}')
    (tmp_path / "q.txt").write_text("ATE(X,Y)")
    code = main(["bound", "--graph", str(tmp_path / "g.txt"), "--evidence", str(tmp_path / "e.json"),
                 "--query", str(tmp_path / "q.txt")])
    out = capsys.readouterr()
    assert code == EXIT_INFEASIBLE
    doc = json.loads(out.out)
    assert doc["status"] == "infeasible"
    assert "certificate" in doc
    assert "infeasible" in out.err


@pytest.mark.parametrize(
    "graph, query, fragment",
    [
        ("X -> -> Y", "ATE(X,Y)", "line 1"),
        ("X -> Y\ncard: X=2, Y=2", "P(W=1)", "W"),
    ],
)
def test_input_errors_exit_1(tmp_path, capsys, graph, query, fragment):
    (tmp_path / "g.txt").write_text(graph)
    (tmp_path / "q.txt").write_text(query)
    code = main(["bound", "--graph", str(tmp_path / "g.txt"), "--query", str(tmp_path / "q.txt")])
    assert code == EXIT_INPUT
    assert fragment in capsys.readouterr().err


def test_missing_file_exit_1(tmp_path, capsys):
    assert main(["bound", "--graph", str(tmp_path / "nope.txt"), "--query", "x"]) == EXIT_INPUT
    assert "error" in capsys.readouterr().err


def test_reproducible_output_is_byte_identical(iv_files):
    args = [sys.executable, "-m", "sharpbounds.cli", *_bound_args(iv_files, "--reproducible")]
    runs = [subprocess.run(args, capture_output=True, check=True).stdout for _ in range(2)]
    assert runs[0] == runs[1]
    assert b"wall_ms" not in runs[0]


def test_simulate_list(capsys):
    assert main(["simulate", "--list"]) == EXIT_OK
    assert capsys.readouterr().out.split() == list(SCENARIOS)


def test_simulate_scenario(capsys):
    assert main(["simulate", "--scenario", "iv_exclusion"]) == EXIT_OK
    rows = capsys.readouterr().out.splitlines()
    assert rows[0].startswith("scenario,query,status")
    assert rows[1].startswith("iv_exclusion,")
    assert main(["simulate", "--scenario", "nope"]) == EXIT_INPUT


def test_dump_strata(tmp_path, capsys):
    (tmp_path / "g.txt").write_text(IV_TEXT)
    assert main(["dump-strata", "--graph", str(tmp_path / "g.txt")]) == EXIT_OK
    text = capsys.readouterr().out
    assert "x_01" in text
    (tmp_path / "d.toml").write_text(dump_dgp(load_scenario("iv_exclusion").dgp))
    assert main(["dump-strata", "--dgp", str(tmp_path / "d.toml")]) == EXIT_OK
    assert "x_01" in capsys.readouterr().out
