import json
import subprocess
import sys

import pytest

from ermlab.cli import main
from ermlab.classes import FunctionClass, make_measure
from ermlab.io import dump_problem


def _write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def _problem(tmp_path):
    P = make_measure([1, 2, 3, 4])
    F = FunctionClass([[1.0, 0.0, 0.5, 0.0], [0.0, 1.0, 0.0, 0.2], [0.3, 0.0, 1.0, 1.0]], label="toy")
    path = tmp_path / "problem.json"
    path.write_text(dump_problem(P, [F]))
    return path.name


def test_missing_n_names_the_field(tmp_path, capsys):
    cfg = _write(tmp_path, {"experiment": "gap-demo", "parameters": {}})
    assert main(["run", str(cfg)]) == 1
    assert "parameters.n" in capsys.readouterr().err


def test_unknown_experiment_and_bad_json(tmp_path, capsys):
    assert main(["run", str(_write(tmp_path, {"experiment": "nope"}))]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["run", str(bad)]) == 1
    assert main(["run", str(tmp_path / "missing.json")]) == 1


def test_xi_curve_run_and_plot(tmp_path):
    doc = {"experiment": "fixed-point", "master_seed": 3, "output_dir": "out",
           "inputs": {"problem": _problem(tmp_path)},
           "parameters": {"n": 20, "K": 200, "empirical": True, "draws": 200}}
    cfg = _write(tmp_path, doc)
    assert main(["run", str(cfg), "--plot"]) == 0
    out = tmp_path / "out"
    report = json.loads((out / "report.json").read_text())
    assert report["experiment"] == "fixed-point" and "wall_clock_seconds" in report
    assert (out / "xi_curve.csv").read_text().startswith("r,value,stderr,K,n,kind\n")
    svgs = sorted(p.name for p in out.glob("*.svg"))
    assert svgs
    assert main(["plot", str(out / "xi_curve.csv"), str(tmp_path / "again.svg")]) == 0
    assert (tmp_path / "again.svg").read_bytes().startswith(b"<?xml")


def test_plot_is_byte_stable(tmp_path):
    doc = {"experiment": "xi-curve", "inputs": {"problem": _problem(tmp_path)},
           "parameters": {"n": 10, "K": 50}}
    cfg = _write(tmp_path, doc)
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 0
    csv = tmp_path / "o" / "xi_curve.csv"
    main(["plot", str(csv), str(tmp_path / "a.svg")])
    main(["plot", str(csv), str(tmp_path / "b.svg")])
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_plot_rejects_malformed_csv(tmp_path, capsys):
    p = tmp_path / "x.csv"
    p.write_text("replicate,pfhat\n0,0.1\n")
    assert main(["plot", str(p), str(tmp_path / "x.svg")]) == 1
    assert "r,value,stderr,K,n,kind" in capsys.readouterr().err
    assert not (tmp_path / "x.svg").exists()


def test_same_config_gives_identical_csvs(tmp_path):
    doc = {"experiment": "gap-demo", "master_seed": 7, "parameters": {"n": 32, "replicates": 40}}
    cfg = _write(tmp_path, doc)
    code = main(["run", str(cfg), "--out", str(tmp_path / "a")])
    assert code in (0, 2)
    assert main(["run", str(cfg), "--out", str(tmp_path / "b"), "--threads", "3"]) == code
    for name in ("pfhat.csv", "xi_curve.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ra = json.loads((tmp_path / "a" / "report.json").read_text())
    rb = json.loads((tmp_path / "b" / "report.json").read_text())
    ra.pop("wall_clock_seconds"), rb.pop("wall_clock_seconds")
    assert ra == rb


def test_seed_override_changes_output(tmp_path):
    doc = {"experiment": "gap-demo", "master_seed": 7, "parameters": {"n": 32, "replicates": 40}}
    cfg = _write(tmp_path, doc)
    main(["run", str(cfg), "--out", str(tmp_path / "a")])
    main(["run", str(cfg), "--out", str(tmp_path / "b"), "--seed", "8"])
    assert (tmp_path / "a" / "pfhat.csv").read_bytes() != (tmp_path / "b" / "pfhat.csv").read_bytes()


@pytest.mark.parametrize("doc", [
    {"experiment": "bernstein-check", "inputs": {"scenario": {"name": "gap", "n": 16}}},
    {"experiment": "validate-t12", "inputs": {"scenario": {"name": "classification", "atoms": 8}},
     "parameters": {"n": 50, "x": 3.0, "replicates": 100, "K": 100}},
    {"experiment": "validate-t31", "inputs": {"scenario": {"name": "gap"}},
     "parameters": {"n": 32, "replicates": 50, "K": 100}},
    {"experiment": "model-select", "inputs": {"scenario": {"name": "nested"}},
     "parameters": {"n": 100, "replicates": 50}},
    {"experiment": "concentration", "inputs": {"scenario": {"name": "classification", "atoms": 4}},
     "parameters": {"n": 3, "K": "exact"}},
])
def test_every_experiment_runs(tmp_path, doc):
    cfg = _write(tmp_path, doc)
    code = main(["run", str(cfg), "--out", str(tmp_path / "o")])
    assert code in (0, 2)
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["experiment"] == doc["experiment"]
    assert (code == 0) == report["passed"]


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, {"experiment": "bernstein-check",
                            "inputs": {"scenario": {"name": "gap", "n": 8}}})
    res = subprocess.run([sys.executable, "-m", "ermlab", "run", str(cfg), "--out", str(tmp_path / "o")],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
