import csv
import io
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from artifact import plotting
from artifact.cli import main

HERE = Path(__file__).parent
DATA = HERE / "data"
GOLDEN = HERE / "golden"

RUNS = {
    "classify": ["classify", "--relation", "etbar", "--input", str(DATA / "t_linear.json")],
    "classify_ebbar": ["classify", "--relation", "ebbar", "--input", str(DATA / "b_twopoint_powers.json")],
    "reduce": ["reduce", "--reduction", "lemma51", "--input", str(DATA / "reduce_lemma51.json")],
    "verify": ["verify", "--reduction", "lemma51", "--samples", "50"],
    "typeconst": ["typeconst"],
    "bmdist": ["bmdist"],
    "uh-criterion": ["uh-criterion", "--input", str(DATA / "uh_thm52.json")],
    "code-check": ["code-check", "--input", str(DATA / "code_l15.json"), "--samples", "200"],
    "mazur-check": ["mazur-check", "--samples", "200", "--input", str(DATA / "xa_element.json")],
}


def run(args):
    return CliRunner().invoke(main, args)


@pytest.mark.parametrize("name", sorted(RUNS))
def test_golden_reports(name):
    res = run(RUNS[name])
    assert res.exit_code == 0, res.output
    assert res.stdout == (GOLDEN / f"{name}.json").read_text()


def test_classify_report_content():
    rep = json.loads(run(RUNS["classify"]).stdout)["results"]
    assert rep["class"] == "E0" and rep["certificate_ok"]
    rep = json.loads(run(RUNS["classify_ebbar"]).stdout)["results"]
    assert rep["class"] == "E0"


def test_verify_spec_run_agrees():
    res = run(["verify", "--reduction", "lemma51", "--samples", "200", "--seed", "7"])
    assert res.exit_code == 0
    (rep,) = json.loads(res.stdout)["results"]
    assert rep["agree"] == 200 and rep["disagree"] == 0


def test_typeconst_csv_columns():
    res = run(["typeconst", "--format", "csv"])
    rows = list(csv.reader(io.StringIO(res.stdout)))
    assert rows[0] == ["n", "exact", "lower_bound", "upper_bound"]
    assert [int(r[0]) for r in rows[1:]] == list(range(2, 11))
    for r in rows[1:]:
        assert abs(float(r[1]) - int(r[0]) ** 0.5) < 1e-12


def test_identical_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["typeconst", "--out", str(d)]).exit_code == 0
    for suffix in ("json", "csv", "svg"):
        assert (a / f"typeconst.{suffix}").read_bytes() == (b / f"typeconst.{suffix}").read_bytes()


def test_svg_carries_labels_and_seed(tmp_path):
    assert run(["mazur-check", "--samples", "100", "--seed", "11", "--out", str(tmp_path)]).exit_code == 0
    svg = (tmp_path / "mazur-check.svg").read_text()
    assert "seed=11" in svg
    assert "<dc:date" not in svg
    rep = json.loads((tmp_path / "mazur-check.json").read_text())
    assert rep["config"]["seed"] == 11
    assert (tmp_path / "mazur-check.csv").exists()


@pytest.mark.parametrize("cmd", ["typeconst", "bmdist", "uh-criterion"])
def test_plots_have_axis_labels(tmp_path, cmd):
    args = RUNS[cmd] + ["--out", str(tmp_path)]
    assert run(args).exit_code == 0
    svg = (tmp_path / f"{cmd}.svg").read_text()
    assert svg.count("<text") >= 3


def test_empty_plot_is_an_error(tmp_path):
    with pytest.raises(plotting.PlotError):
        plotting.plot_spec(None, tmp_path / "x.svg", 0)
    with pytest.raises(plotting.PlotError):
        plotting.line_plot(tmp_path / "x.svg", [], {}, "x", "y", "t", 0)


def test_input_errors_exit_2(tmp_path):
    res = run(["classify", "--relation", "etbar", "--input", str(DATA / "bad_descriptor.json")])
    assert res.exit_code == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["classify", "--relation", "etbar", "--input", str(bad)]).exit_code == 2
    assert run(["classify", "--relation", "etbar"]).exit_code == 2
    assert run(["verify", "--reduction", "no_such_map"]).exit_code == 2


def test_schema_errors_name_the_location(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"kind": "Linear", "params": {"a": "x", "b": 0}}))
    res = run(["classify", "--relation", "etbar", "--input", str(bad)])
    assert res.exit_code == 2
    assert "params" in res.output


def test_verification_failure_exits_1(tmp_path):
    f = tmp_path / "code.json"
    f.write_text(json.dumps({"norm": "lp", "p": 2, "mutate": "iii"}))
    res = run(["code-check", "--input", str(f), "--samples", "200"])
    assert res.exit_code == 1
    assert "iii" in res.stdout


def test_seed_and_horizon_are_echoed():
    rep = json.loads(run(["bmdist", "--seed", "3"]).stdout)
    assert rep["config"]["seed"] == 3 and "horizon" in rep["config"]
    assert "wall" not in json.dumps(rep)
