import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from posctrl import __version__
from posctrl.cli import main, read_control_csv, run_analyze, run_simulate
from posctrl.scenario import (ScenarioError, bundled, load_scenario, scenario_to_dict,
                              validate_dict, write_scenario)


def cycle_dict(**over):
    d = json.loads(bundled("cycle3").read_text())
    d.update(over)
    return d


def write(tmp_path, data, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return p


def paths(exc):
    return [p for p, _ in exc.value.problems]


def write_control(tmp_path, t, u, name="u.csv"):
    p = tmp_path / name
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"u_{i + 1}" for i in range(u.shape[1])])
        for ti, row in zip(t, u):
            w.writerow([ti, *row])
    return p


# -- scenarios ----------------------------------------------------------------

def test_bundled_scenarios_load():
    cyc = load_scenario(bundled("cycle3"))
    assert cyc.kind == "transport" and cyc.n_edges == 3
    heat = load_scenario(bundled("heat_path"))
    assert heat.kind == "heat" and heat.n_edges == 3 and heat.k_max == 64
    with pytest.raises(FileNotFoundError):
        bundled("nope")


@pytest.mark.parametrize("name", ["cycle3", "heat_path"])
def test_round_trip(tmp_path, name):
    s = load_scenario(bundled(name))
    write_scenario(s, tmp_path / "x.json")
    assert load_scenario(tmp_path / "x.json") == s
    assert validate_dict(scenario_to_dict(s)) == s


def test_field_level_errors(tmp_path):
    bad = cycle_dict(params={"velocity": -1.0})
    with pytest.raises(ScenarioError) as e:
        validate_dict(bad)
    assert "params.velocity" in paths(e)
    with pytest.raises(ScenarioError) as e:
        validate_dict(cycle_dict(control={"matrix": [[1.0], [-1.0], [0.0]]}))
    assert paths(e) == ["control.matrix"]
    with pytest.raises(ScenarioError) as e:
        validate_dict(cycle_dict(control={"matrix": [[1.0], [0.0]]}))
    assert "control.matrix" in paths(e)
    g = cycle_dict()["graph"]
    g["edges"][0]["head"] = 9
    with pytest.raises(ScenarioError) as e:
        validate_dict(cycle_dict(graph=g))
    assert "graph.edges.0.head" in paths(e)
    with pytest.raises(ScenarioError) as e:
        validate_dict(cycle_dict(coupling=[[0.0]]))
    assert "coupling" in paths(e)
    with pytest.raises(ScenarioError) as e:
        validate_dict(cycle_dict(mode="sometimes"))
    assert "mode" in paths(e)


def test_kirchhoff_violation_is_reported_on_graph():
    g = cycle_dict()["graph"]
    g["edges"][0]["weight"] = 0.5
    with pytest.raises(ScenarioError) as e:
        validate_dict(cycle_dict(graph=g))
    assert paths(e) == ["graph"]


def test_heat_specific_errors():
    d = json.loads(bundled("heat_path").read_text())
    d["discretization"] = {"P": 21, "K_max": 30}
    with pytest.raises(ScenarioError) as e:
        validate_dict(d)
    assert "discretization.K_max" in paths(e)
    d = json.loads(bundled("heat_path").read_text())
    d["coupling"] = [[0, 0], [1, 0]]
    with pytest.raises(ScenarioError):
        validate_dict(d)


def test_unreadable_files(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(write(tmp_path, "{not json"))
    with pytest.raises(ScenarioError):
        load_scenario(write(tmp_path, "[1, 2]"))
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.json")


# -- analyze ------------------------------------------------------------------

def test_analyze_writes_reports(tmp_path, capsys):
    out = tmp_path / "a"
    assert main(["analyze", "--scenario", str(bundled("cycle3")), "--out", str(out)]) == 0
    assert "controllable" in capsys.readouterr().out
    for f in ("verdict.json", "generators.csv", "generators.png", "profiles.png"):
        assert (out / f).stat().st_size > 0
    rep = json.loads((out / "verdict.json").read_text())
    assert rep["decision"] == "controllable" and rep["criterion"] == "rank"
    assert rep["diagnostics"]["frequency_agrees"]


def test_reports_are_reproducible(tmp_path):
    for name in ("cycle3", "heat_path"):
        outs = [tmp_path / f"{name}{i}" for i in range(2)]
        for o in outs:
            assert main(["analyze", "--scenario", str(bundled(name)), "--out", str(o)]) == 0
        for f in ("verdict.json", "generators.csv"):
            assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()


def test_analyze_mode_override_prints_certificate(tmp_path, capsys):
    out = tmp_path / "h"
    code = main(["analyze", "--scenario", str(bundled("heat_path")), "--out", str(out),
                 "--mode", "control_constrained"])
    assert code == 0
    assert "certificate:" in capsys.readouterr().out
    rep = json.loads((out / "verdict.json").read_text())
    assert rep["decision"] == "not_controllable"
    assert rep["diagnostics"]["sign_alternation"]["holds"]


def test_analyze_exit_codes(tmp_path):
    assert main(["analyze", "--scenario", str(write(tmp_path, cycle_dict(mode="x"))),
                 "--out", str(tmp_path / "o")]) == 2
    stuck = cycle_dict(params={"velocity": [1.0, 2.0, 1.0]}, probe={"mu_min": 0.0, "mu_count": 1})
    assert main(["analyze", "--scenario", str(write(tmp_path, stuck)),
                 "--out", str(tmp_path / "o")]) == 3


def test_run_analyze_without_output():
    v = run_analyze(load_scenario(bundled("heat_path")))
    assert v.decision == "controllable"


# -- simulate -----------------------------------------------------------------

def test_simulate_zero_control(tmp_path):
    traj, summary = run_simulate(load_scenario(bundled("cycle3")), None, 1.0, tmp_path / "z")
    assert all(not z.values.any() for z in traj.states)
    assert summary["positivity_violations"] == 0
    for f in ("trajectory.csv", "summary.json", "trajectory.png"):
        assert (tmp_path / "z" / f).exists()


def test_simulate_impulse_cli(tmp_path, capsys):
    t = np.arange(0, 0.5, 0.005)
    u = (t < 0.1).astype(float)[:, None]
    ctrl = write_control(tmp_path, t, u)
    out = tmp_path / "s"
    code = main(["simulate", "--scenario", str(bundled("cycle3")), "--control", str(ctrl),
                 "--t-final", "2.5", "--out", str(out)])
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["positivity_violations"] == 0
    assert summary["final_norm"] > 0
    assert json.loads(capsys.readouterr().out)["steps"] == summary["steps"]


def test_simulate_heat_approaches_steady_state(tmp_path):
    scen = load_scenario(bundled("heat_path"))
    ctrl = read_control_csv(write_control(tmp_path, [0.0], np.ones((1, 3))), 3, True)
    traj, summary = run_simulate(scen, ctrl, 3.0, tmp_path / "h")
    norms = [z.norm() for z in traj.states]
    assert np.all(np.diff(norms) >= -1e-12)
    assert summary["positivity_violations"] == 0
    assert (tmp_path / "h" / "coefficients.csv").exists()


def test_control_file_errors(tmp_path):
    scen = str(bundled("cycle3"))
    neg = write_control(tmp_path, [0.0, 0.1], np.array([[1.0], [-1.0]]), "neg.csv")
    uneven = write_control(tmp_path, [0.0, 0.1, 0.3], np.ones((3, 1)), "uneven.csv")
    late = write_control(tmp_path, [0.1, 0.2], np.ones((2, 1)), "late.csv")
    cols = write_control(tmp_path, [0.0], np.ones((1, 2)), "cols.csv")
    for f in (neg, uneven, late, cols):
        assert main(["simulate", "--scenario", scen, "--control", str(f), "--t-final", "0.5",
                     "--out", str(tmp_path / "o")]) == 2


# -- szasz and selftest ---------------------------------------------------------

def test_szasz_cli(tmp_path, capsys):
    out = tmp_path / "sz"
    assert main(["szasz", "--check", "--out", str(out)]) == 0
    summary = json.loads((out / "szasz_summary.json").read_text())
    assert summary["ok"] and max(summary["ratios"]) <= 0.75
    assert (out / "szasz.csv").exists() and (out / "szasz_convergence.png").exists()
    assert "ratios" in capsys.readouterr().out


def test_selftest_and_module_entry(capsys):
    assert main(["selftest"]) == 0
    assert "FAIL" not in capsys.readouterr().out
    res = subprocess.run([sys.executable, "-m", "posctrl", "--version"], capture_output=True,
                         text=True)
    assert res.returncode == 0 and __version__ in res.stdout
