"""End-to-end runs of the command line front end.

Everything goes through ``run_cli`` with an explicit --out directory so
the tests never touch the working tree; one test exercises the installed
``tangenteq`` script for real.
"""

import json
import os
import shutil
import subprocess

import numpy as np
import pytest

from tangenteq.cli import run_cli

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def _cfg(name):
    return os.path.join(CONFIG_DIR, name)


def _report(out):
    with open(os.path.join(out, "report.json"), "r", encoding="utf-8") as fh:
        return json.load(fh)


GATE_FAIL_CFG = """\
[problem]
kind = neumann_rd

[nonlinearity]
name = constant
lo = 1.0
hi = 1.0

[solver]
max_iter = 40
"""


# ---------------------------------------------------------------------------
# solve


def test_solve_converges_and_writes_outputs(tmp_path, capsys):
    code = run_cli(["solve", _cfg("neumann_linear.cfg"),
                    "--out", str(tmp_path)])
    assert code == 0
    captured = capsys.readouterr().out
    assert "status converged after 33 sweeps" in captured

    rep = _report(tmp_path)
    assert rep["status"] == "converged"
    assert rep["kind"] == "neumann_rd"
    for key in ("residual_history", "tangency_residual",
                "constraint_violation", "bound_checks", "condition_reports",
                "config", "iterations", "method"):
        assert key in rep
    assert rep["condition_reports"]["passed"] is True
    assert rep["residual_history"][-1] <= 1e-9

    data = np.loadtxt(tmp_path / "u_star.csv", delimiter=",", skiprows=1)
    assert data.shape == (101, 2)
    assert np.all(np.abs(data[:, 1] - 0.5) <= 1e-8)
    hist = np.loadtxt(tmp_path / "residuals.csv", delimiter=",", skiprows=1)
    assert hist.shape[0] == rep["iterations"]


def test_solve_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli(["solve", _cfg("neumann_logistic.cfg"), "--out", str(a)]) == 0
    assert run_cli(["solve", _cfg("neumann_logistic.cfg"), "--out", str(b)]) == 0
    for name in ("report.json", "u_star.csv", "residuals.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_solve_gate_blocks_and_force_overrides(tmp_path, capsys):
    cfg = tmp_path / "push.cfg"
    cfg.write_text(GATE_FAIL_CFG)

    gated = tmp_path / "gated"
    assert run_cli(["solve", str(cfg), "--out", str(gated)]) == 2
    assert "rerun with --force" in capsys.readouterr().out
    assert _report(gated)["status"] == "gate_failed"
    assert not (gated / "u_star.csv").exists()

    forced = tmp_path / "forced"
    assert run_cli(["solve", str(cfg), "--out", str(forced), "--force"]) == 3
    rep = _report(forced)
    assert rep["status"] == "tangency_failure"
    assert rep["failure"]["node"] == 0
    assert (forced / "u_star.csv").exists()


def test_solve_nonconvergent_box_exits_three(tmp_path):
    # pinned walls at 0 can never reach a box that starts at 0.5
    code = run_cli(["solve", _cfg("dirichlet_box.cfg"), "--out", str(tmp_path)])
    assert code == 3
    rep = _report(tmp_path)
    assert rep["status"] == "non_convergence"
    assert rep["constraint_violation"] >= 0.5 - 1e-9


def test_solve_moving_rectangles(tmp_path):
    code = run_cli(["solve", _cfg("moving_rectangles.cfg"),
                    "--out", str(tmp_path)])
    assert code == 0
    rep = _report(tmp_path)
    assert rep["iterations"] == 10
    data = np.loadtxt(tmp_path / "u_star.csv", delimiter=",", skiprows=1)
    mid = 1.0 - 1.0 / np.cosh(0.5)
    assert abs(data[50, 1] - mid) <= 1e-3


def test_truncation_config_runs(tmp_path):
    cfg = tmp_path / "trunc.cfg"
    cfg.write_text("""\
[problem]
kind = dirichlet_rd

[nonlinearity]
name = linear
a = 1.0
b = -1.0

[constraint]
kind = box
lo = -1.0
hi = 1.0

[solver]
method = truncation
""")
    assert run_cli(["solve", str(cfg), "--out", str(tmp_path)]) == 0
    rep = _report(tmp_path)
    assert rep["method"] == "truncation"


# ---------------------------------------------------------------------------
# miranda


def test_miranda_certified_zero(tmp_path, capsys):
    code = run_cli(["miranda", _cfg("affine.cfg"), "--out", str(tmp_path)])
    assert code == 0
    rep = _report(tmp_path)
    assert rep["status"] == "converged"
    assert rep["certified_path"] is True
    assert abs(rep["point"][0] - 0.25) <= 1e-9
    assert abs(rep["point"][1] + 0.5) <= 1e-9
    assert "point:" in capsys.readouterr().out


def test_miranda_identity_map_fails_certification(tmp_path, capsys):
    cfg = tmp_path / "ident.cfg"
    cfg.write_text("""\
[problem]
kind = miranda

[miranda]
lo = -1,-1
hi = 1,1
matrix = 1,0;0,1
offset = 0,0
""")
    assert run_cli(["miranda", str(cfg), "--out", str(tmp_path)]) == 2
    assert "hypothesis failure" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# invariance and condition checks


def test_invariance_pass_and_fail(tmp_path, capsys):
    assert run_cli(["check-invariance", _cfg("neumann_linear.cfg"),
                    "--out", str(tmp_path / "ok")]) == 0
    assert "invariance holds" in capsys.readouterr().out

    assert run_cli(["check-invariance", _cfg("dirichlet_box.cfg"),
                    "--out", str(tmp_path / "bad")]) == 2
    assert "invariance FAILS" in capsys.readouterr().out
    rep = _report(tmp_path / "bad")["report"]
    assert rep["witness"] == {"h": 0.25, "halfspace": 1, "node": 0,
                              "overshoot": 0.5, "sample": 0}


def test_conditions_bernstein_margins(tmp_path, capsys):
    code = run_cli(["check-conditions", _cfg("bernstein.cfg"),
                    "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert out.count("[ok  ]") == 3
    rep = _report(tmp_path)
    margins = {i["name"]: i["margin"] for i in rep["report"]["items"]}
    assert margins["sign_outside_ball"] == pytest.approx(2.0, abs=0.01)
    assert margins["sphere_tangency"] == pytest.approx(6.0)


def test_conditions_moving_rectangles_include_shape_items(tmp_path):
    code = run_cli(["check-conditions", _cfg("moving_rectangles.cfg"),
                    "--out", str(tmp_path)])
    assert code == 0
    names = [i["name"] for i in _report(tmp_path)["report"]["items"]]
    assert "face[0].low" in names and "subharmonic_alpha" in names


def test_conditions_gate_failure_exits_two(tmp_path):
    cfg = tmp_path / "push.cfg"
    cfg.write_text(GATE_FAIL_CFG)
    assert run_cli(["check-conditions", str(cfg), "--out", str(tmp_path)]) == 2


def test_seed_override_is_accepted(tmp_path):
    assert run_cli(["check-conditions", _cfg("neumann_linear.cfg"),
                    "--out", str(tmp_path), "--seed", "7"]) == 0


# ---------------------------------------------------------------------------
# simulate


def test_simulate_tracks_viability(tmp_path, capsys):
    code = run_cli(["simulate", _cfg("neumann_linear.cfg"),
                    "--out", str(tmp_path)])
    assert code == 0
    assert "status completed after 20 steps" in capsys.readouterr().out
    rep = _report(tmp_path)["report"]
    assert rep["status"] == "completed"
    assert rep["max_constraint_distance"] <= 1e-9
    data = np.loadtxt(tmp_path / "terminal_state.csv", delimiter=",",
                      skiprows=1)
    assert data.shape == (101, 2)


# ---------------------------------------------------------------------------
# plumbing


def test_out_dir_env_fallback(tmp_path, monkeypatch):
    target = tmp_path / "from_env"
    monkeypatch.setenv("TANGENT_EQ_OUT", str(target))
    assert run_cli(["check-conditions", _cfg("neumann_linear.cfg")]) == 0
    assert (target / "report.json").exists()


def test_usage_and_config_errors_exit_one(tmp_path, capsys):
    assert run_cli([]) == 1
    assert run_cli(["frobnicate", "x.cfg"]) == 1
    assert run_cli(["solve", str(tmp_path / "missing.cfg")]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("[problem]\nkind = nonsense\n")
    assert run_cli(["solve", str(bad)]) == 1
    assert "error:" in capsys.readouterr().err


def test_unreadable_config_exits_one(tmp_path, capsys):
    binary = tmp_path / "junk.cfg"
    binary.write_bytes(b"\x8c\xff\x00\xfe not text")
    assert run_cli(["solve", str(binary)]) == 1
    assert "not UTF-8" in capsys.readouterr().err


def test_command_kind_mismatch_exits_one(capsys):
    assert run_cli(["miranda", _cfg("neumann_linear.cfg")]) == 1
    assert "does not apply" in capsys.readouterr().err
    assert run_cli(["solve", _cfg("affine.cfg")]) == 1
    assert "does not apply" in capsys.readouterr().err


def test_installed_script_runs(tmp_path):
    exe = shutil.which("tangenteq")
    if exe is None:
        pytest.skip("console script not on PATH")
    proc = subprocess.run([exe, "miranda", _cfg("affine.cfg"),
                           "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "status converged" in proc.stdout
