import json
import re

import pytest

from cia import corpus
from cia.cli import main

V1, V2 = (str(corpus.path("coreutils_like", v)) for v in (1, 2))


def cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_json_report(capsys):
    code, out, _ = cli(capsys, "analyze", "--v1", V1, "--v2", V2)
    assert code == 0
    rep = json.loads(out)
    assert rep["schema"] == "cia-report/1"
    assert rep["counts"] == {"dcia": 32, "sem": 1, "reduction_pct": 96.88}
    mapped = {(r["proc"], r["label"]) for r in rep["impacted_nodes"] if r["mapped"] and r["version"] == 1}
    assert mapped == {("print_minor_version", "pr")}


def test_text_and_json_counts_agree(capsys):
    _, js, _ = cli(capsys, "analyze", "--v1", V1, "--v2", V2, "--mode", "dcia")
    _, text, _ = cli(capsys, "analyze", "--v1", V1, "--v2", V2, "--mode", "dcia", "--report", "text")
    counts = json.loads(js)["counts"]
    m = re.search(r"dcia=(\d+) sem=(\d+)", text)
    assert (int(m[1]), int(m[2])) == (counts["dcia"], counts["sem"]) == (32, 32)


def test_dumps_and_iterations(capsys, tmp_path):
    eqf, depf, it = tmp_path / "eq.json", tmp_path / "deps.json", tmp_path / "it"
    code, _, _ = cli(capsys, "analyze", "--v1", V1, "--v2", V2, "--dump-equivs", str(eqf),
                     "--dump-depends", str(depf), "--emit-iterations", str(it))
    assert code == 0
    assert {"pre_equiv", "summary_equiv"} == set(json.loads(eqf.read_text()))
    assert "depends_on_var" in json.loads(depf.read_text())["v1"]
    names = sorted(p.name for p in it.iterdir())
    assert names[0] == "iteration_dcia.json" and "iteration_k0.json" in names
    # feeding the dumped facts back gives the same answer
    code, out, _ = cli(capsys, "analyze", "--v1", V1, "--v2", V2, "--eq", str(eqf))
    assert json.loads(out)["counts"]["sem"] == 1


def test_k_bound(capsys):
    _, out, _ = cli(capsys, "analyze", "--v1", V1, "--v2", V2, "--k", "-1")
    assert json.loads(out)["counts"]["sem"] == 32


def test_diff_round_trips_through_map(capsys, tmp_path):
    code, out, _ = cli(capsys, "diff", "--v1", V1, "--v2", V2)
    assert code == 0
    mapf = tmp_path / "map.json"
    mapf.write_text(out)
    code, out, _ = cli(capsys, "analyze", "--v1", V1, "--v2", V2, "--map", str(mapf), "--mode", "dcia")
    assert code == 0 and json.loads(out)["counts"]["dcia"] == 32


def test_run_prints_a_trace(capsys):
    code, out, _ = cli(capsys, "run", V1, "--input", "name=1", "--input", "version=1", "--input", "lc=1")
    assert code == 0
    assert out.splitlines()[-1] == "# normal"
    assert out.startswith("print_product_info:")


def test_oracle_text(capsys):
    path = lambda v: str(corpus.path("bugfix", v))
    code, out, _ = cli(capsys, "oracle", "--v1", path(1), "--v2", path(2))
    assert code == 0 and "impacted" in out


@pytest.mark.parametrize(
    "argv",
    [
        ["analyze", "--v1", "/nonexistent.ir", "--v2", V2],
        ["analyze", "--v1", V1],
        ["analyze", "--v1", V1, "--v2", V2, "--k", "many"],
        ["run", V1, "--input", "nosuch=1"],
        ["run", V1, "--input", "name"],
    ],
)
def test_bad_input_exits_2(capsys, argv):
    code, _, err = cli(capsys, *argv)
    assert code == 2
    assert err


def test_malformed_program_exits_2(capsys, tmp_path):
    bad = tmp_path / "bad.ir"
    bad.write_text("proc main( { x: skip; }")
    code, _, err = cli(capsys, "run", str(bad))
    assert code == 2 and "bad.ir" in err


def test_invalid_map_exits_2(capsys, tmp_path):
    mapf = tmp_path / "map.json"
    mapf.write_text(json.dumps({"map": [{"proc": "locale_ok", "from": "r1", "to": "r0"}]}))
    code, _, err = cli(capsys, "analyze", "--v1", V1, "--v2", V2, "--map", str(mapf))
    assert code == 2 and "invalid node map" in err


def test_bad_env_budget_exits_2(capsys, monkeypatch):
    monkeypatch.setenv("CIA_ENUM_BUDGET", "lots")
    code, _, err = cli(capsys, "analyze", "--v1", V1, "--v2", V2)
    assert code == 2 and "CIA_ENUM_BUDGET" in err
