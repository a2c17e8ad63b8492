import json
import os
import shutil
import subprocess
import sys

import numpy as np
import pytest

from densgraph import cli
from densgraph import spectrum
from densgraph.surface import parse_mesh_text

GRIM = """\
[density]
kind = translator

[problem]
mode = vertical
n = 1
nodes = 65
lambda = 0
boundary = fixture:grim_reaper
"""

TOY = """\
[density]
kind = expander

[problem]
mode = vertical
n = 2
nodes = 5
lambda = 0
bounds = -1, 1; -1, 1
boundary = constant:0.5
"""

SHRINKER = """\
[density]
kind = shrinker

[problem]
mode = vertical
n = 2
nodes = 17
lambda = 0
bounds = -10, 10; -10, 10
"""


@pytest.fixture
def write(tmp_path, monkeypatch):
    # configs without [output] write to the working directory
    monkeypatch.chdir(tmp_path)

    def _write(text, name="run.cfg"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    return _write


def test_solve_writes_outputs(write, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["solve", write(GRIM), "--out", str(out)]) == 0
    report = json.loads((out / "solve.json").read_text())
    assert report["converged"] and report["final_residual"] <= 1e-10
    verts, simp = parse_mesh_text((out / "graph.mesh").read_text())
    assert verts.shape == (65, 2) and simp.shape == (64, 2)
    assert (out / "field.csv").read_text().startswith("x1,x2,N1,N2,nH,A2,h,phi\n")
    assert not [f for f in os.listdir(out) if f.startswith(".tmp")]
    assert json.loads(capsys.readouterr().out)["converged"]


def test_outputs_byte_identical(write, tmp_path):
    cfg = write(GRIM)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["solve", cfg, "--out", str(a)]) == 0
    assert cli.main(["solve", cfg, "--out", str(b)]) == 0
    for f in ("graph.mesh", "field.csv", "solve.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_formats_select_outputs(write, tmp_path):
    out = tmp_path / "o"
    assert cli.main(["solve", write(GRIM + "[output]\nformats = json\n"), "--out", str(out)]) == 0
    assert sorted(os.listdir(out)) == ["solve.json"]


def test_nonconvergence_exit_code(write, tmp_path):
    code = cli.main(["solve", write(GRIM), "--set", "solver.max_iter=1", "--out", str(tmp_path)])
    assert code == 1


def test_config_errors_exit_2(write, capsys):
    assert cli.main(["solve", write(GRIM.replace("lambda = 0\n", ""))]) == 2
    assert "missing required key problem.lambda" in capsys.readouterr().err
    assert cli.main(["solve", write(GRIM), "--set", "problem.nodes=3"]) == 2
    assert cli.main(["solve", "/nonexistent/run.cfg"]) == 2
    assert cli.main(["solve", write(GRIM.replace("grim_reaper", "no_such"))]) == 2
    assert cli.main(["bogus"]) == 2


def test_toy_stability_matches_dense_oracle(write, tmp_path):
    out = tmp_path / "s"
    code = cli.main(["stability", write(TOY), "--out", str(out)])
    rep = json.loads((out / "spectrum.json").read_text())
    cfg = cli.parse_config(TOY)
    graph, _ = cli.run_solve(cfg)
    _, asm = cli.run_stability(graph, cli.build_density(cfg),
                               {"tol": None, "eig_tol": 1e-9, "max_iter": 500})
    dense = spectrum.dense_eigenvalues(asm)[0]
    assert abs(rep["mu_min"] - dense) <= 1e-9
    assert code == cli.VERDICT_EXIT[rep["verdict"]]
    lines = (out / "eigenvector.csv").read_text().splitlines()
    assert lines[0] == "node,value" and len(lines) == 10


def test_shrinker_plane_unstable_exit_3(write, capsys):
    assert cli.main(["stability", write(SHRINKER)]) == 3
    assert json.loads(capsys.readouterr().out)["mu_min"] < -0.1
    assert cli.main(["stability", "--fixture", "shrinker_plane", "--nodes", "17"]) == 3


def test_stability_from_graph_file(write, tmp_path):
    out = tmp_path / "g"
    cfg = write(GRIM)
    assert cli.main(["solve", cfg, "--out", str(out)]) == 0
    assert cli.main(["stability", cfg, "--graph", str(out / "graph.mesh")]) == 0


def test_stability_fixture_errors():
    assert cli.main(["stability", "--fixture", "nope"]) == 2
    assert cli.main(["stability", "--fixture", "plane", "--nodes", "3"]) == 2
    assert cli.main(["stability"]) == 2


def test_inconclusive_exit_4(write):
    # a huge verdict band turns any eigenvalue into Inconclusive
    assert cli.main(["stability", write(TOY + "[spectrum]\ntol = 1e6\n")]) == 4


def test_identities_command(tmp_path, capsys):
    assert cli.main(["identities", "--fixtures", "plane,grim_reaper", "--levels", "3",
                     "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "identities.json").read_text())
    assert data and all(r["pass"] for r in data)
    capsys.readouterr()
    assert cli.main(["identities", "--fixtures", ""]) == 0
    assert json.loads(capsys.readouterr().out) == []
    assert cli.main(["identities", "--fixtures", "unknown"]) == 2
    assert cli.main(["identities", "--levels", "1"]) == 2


def test_calibrate_command(write, tmp_path, capsys):
    cfg = write(GRIM + "[calibration]\nbase = fixture:grim_reaper\nnodes = 257\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["calibrate", cfg, "--trials", "3", "--seed", "5", "--out", str(a)]) == 0
    assert cli.main(["calibrate", cfg, "--trials", "3", "--seed", "5", "--out", str(b)]) == 0
    text = (a / "calibration.csv").read_text()
    assert text == (b / "calibration.csv").read_text()
    rows = text.splitlines()
    assert rows[0] == "trial,amplitude,deltaA,verdict" and len(rows) == 4
    capsys.readouterr()
    assert cli.main(["calibrate", cfg, "--trials", "0"]) == 0
    assert capsys.readouterr().out == "trial,amplitude,deltaA,verdict\n"
    assert cli.main(["calibrate", cfg, "--seed", "-1"]) == 2


def test_sweep_command(write, tmp_path, capsys):
    cfg = write(GRIM)
    assert cli.main(["sweep", cfg, "--param", "nodes", "--range", "33,65", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "sweep.csv").read_text().splitlines()
    assert rows[0] == "parameter,mu_min,verdict,solve_residual,eig_residual,error"
    errs = [float(r.split(",")[-1]) for r in rows[1:]]
    assert errs[0] / errs[1] > 3.5
    capsys.readouterr()
    assert cli.main(["sweep", cfg, "--param", "lambda", "--range", ""]) == 0
    assert capsys.readouterr().out.strip() == rows[0]
    assert cli.main(["sweep", cfg, "--param", "colour", "--range", "1,2"]) == 2


def test_json17_formatting():
    text = cli.json17({"a": 0.1, "b": [float("nan"), float("inf")], "c": True, "d": 3})
    assert '"a": 0.10000000000000001' in text
    assert "NaN" in text and "Infinity" in text and '"c": true' in text


def test_fixtures_listing(capsys):
    assert cli.main(["fixtures"]) == 0
    assert "grim_reaper" in capsys.readouterr().out


@pytest.mark.skipif(shutil.which("densgraph") is None, reason="console script not installed")
def test_console_script(write):
    res = subprocess.run(["densgraph", "stability", "--fixture", "shrinker_plane", "--nodes", "9"],
                         capture_output=True, text=True)
    assert res.returncode == 3
    assert json.loads(res.stdout)["verdict"] == "Unstable"
    res = subprocess.run([sys.executable, "-m", "densgraph.cli", "fixtures"], capture_output=True)
    assert res.returncode == 0
