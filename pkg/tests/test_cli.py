import csv
import json
import subprocess
import sys

import pytest

from pdegreedy.cli import main


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_solve_writes_trace(tmp_path, capsys):
    cfg = _write(tmp_path, {"problem": "interp_1d", "beta": 1.0, "n_max": 5, "candidates": [200]})
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "trace.csv").open()))
    assert len(rows) == 5
    assert list(rows[0]) == ["n", "functional_id", "domain", "op", "x", "eta", "power", "residual",
                             "linf_error", "l2_error", "ms"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n"] == 5 and summary["stop_reason"] == "n_max"


def test_p_greedy_first_pick_is_lowest_id_on_symmetric_pool(tmp_path):
    # two endpoint candidates with equal power
    cfg = _write(tmp_path, {"problem": {"dim": 1, "solution": "x", "pieces": [
        {"geometry": "interval_endpoints", "op": "identity"}]}, "beta": 0, "n_max": 1, "candidates": [2]})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "trace.csv").open()))
    assert rows[0]["functional_id"] == "0"


def test_poisson_1d_regression_baseline(tmp_path):
    from pdegreedy.oracle import solve_dense
    from pdegreedy.kernels import MaternKernel
    from pdegreedy.problems import get_problem
    from pdegreedy.functionals import Functional
    from pdegreedy import problems
    import numpy as np

    cfg = _write(tmp_path, {"problem": "poisson_1d", "kernel": {"nu": "5/2"}, "beta": 1, "n_max": 40})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    spec, k = get_problem("poisson_1d"), MaternKernel("5/2")
    fs = [Functional.from_dict(f) for f in summary["selected"]]
    data = np.concatenate([spec.pieces[f.domain].data_fn(np.array([f.point])) for f in fs])
    grid = problems.test_grid(spec)
    dense = np.max(np.abs(spec.exact_solution(grid) - solve_dense(k, fs, data).evaluate(k, grid)))
    assert summary["final_linf_error"] == pytest.approx(dense, rel=1e-6)
    # recorded baseline (seed 0, 2000 interior candidates)
    assert summary["final_linf_error"] == pytest.approx(9.38e-4, rel=0.01)


def test_config_errors_are_json(tmp_path, capsys):
    cfg = _write(tmp_path, {"problem": "interp_1d", "bogus": 1})
    assert main(["solve", "--config", cfg]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError" and "bogus" in err["message"]
    cfg = _write(tmp_path, {"problem": "poisson_1d", "kernel": {"nu": "3/2"}})
    assert main(["solve", "--config", cfg]) == 1
    assert "ConfigError" in capsys.readouterr().err
    assert main(["solve", "--config", str(tmp_path / "missing.json")]) == 1
    cfg = _write(tmp_path, {"problem": "interp_1d", "betas": [0, 1]})
    assert main(["solve", "--config", cfg]) == 1


def test_seed_and_threads_override(tmp_path):
    base = {"problem": "poisson_2d", "beta": 1, "n_max": 15, "candidates": [600, 60], "test_resolution": 11}
    cfg = _write(tmp_path, base)
    texts = []
    for threads in ("1", "8"):
        out = tmp_path / threads
        assert main(["solve", "--config", cfg, "--out", str(out), "--threads", threads, "--seed", "9"]) == 0
        rows = [r[:-1] for r in csv.reader((out / "trace.csv").open())]
        texts.append(rows)
        assert json.loads((out / "summary.json").read_text())["config"]["seed"] == 9
    assert texts[0] == texts[1]


def test_verify_passes_and_fault_fails(capsys):
    assert main(["verify"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert all(l.startswith("[PASS]") for l in lines) and len(lines) == 5
    assert main(["verify", "--inject-fault", "2:1.001"]) == 1
    out = capsys.readouterr().out
    assert "[FAIL] kernel_finite_differences" in out


def test_study_cli_and_breakdown_exit(tmp_path, capsys, monkeypatch):
    cfg = _write(tmp_path, {"problem": "interp_1d", "betas": [0, 1], "n_max": 30, "candidates": [200],
                            "test_resolution": 101})
    assert main(["study", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    assert "E-slope" in capsys.readouterr().out
    from pdegreedy import greedy

    monkeypatch.setattr(greedy, "NEGATIVE_POWER2_LIMIT", 2.0)
    assert main(["study", "--config", cfg, "--out", str(tmp_path / "b")]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "NumericalBreakdown"
    report = json.loads((tmp_path / "b" / "study.json").read_text())
    assert report["runs"][0]["stop_reason"] == "breakdown"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "pdegreedy", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "study" in res.stdout
