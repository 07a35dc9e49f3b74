"""Command line entry point: ``posctrl analyze | simulate | szasz | selftest``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import criteria as cr
from . import heat as hm
from . import plotting
from . import transport as tr
from .cones import cone_equals_positive_orthant, cone_member, recheck
from .grid import ControlSignal, GridFunction, uniform_grid
from .lp import LPError
from .scenario import Scenario, ScenarioError, bundled, load_scenario, scenario_to_dict
from .spectral import SpectralError
from .szasz import MirakjanEval, TailError, convergence_table, mirakjan_apply

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
VIOLATION_REL = 1e-12


def _fmt(x) -> str:
    return "" if x is None or (isinstance(x, float) and np.isnan(x)) else f"{x:.17g}"


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else (_fmt(v) if isinstance(v, float) else v)
                        for v in row])


# -- analyze ------------------------------------------------------------------

def run_analyze(scen: Scenario, out: Path | None = None, mode: str | None = None) -> cr.Verdict:
    mode = mode or scen.mode
    model = scen.model()
    probe = cr.choose_probe(model, scen.mu_min, scen.mu_count, scen.n_max)
    if scen.kind == "transport":
        system = scen.system()
        if mode == cr.POSITIVE:
            if cr.rank_regime_issues(system):
                verdict = cr.decide_transport_frequency(system, probe, scen.tol, scen.n_points)
            else:
                verdict = cr.decide_transport_rank(system, scen.tol)
                freq = cr.decide_transport_frequency(system, probe, scen.tol, scen.n_points)
                verdict.probe = probe
                verdict.diagnostics["frequency_decision"] = freq.decision
                verdict.diagnostics["frequency_agrees"] = freq.decision == verdict.decision
        else:
            verdict = cr.decide_theorem1(model, probe, scen.tol)
    else:
        if mode == cr.POSITIVE:
            verdict = cr.decide_theorem2(model, probe, scen.tol)
        else:
            verdict = cr.decide_theorem1(model, probe, scen.tol)
            net = scen.system()
            if hm.is_path(net):
                verdict.diagnostics["sign_alternation"] = cr.heat_sign_alternation(net, probe.mu_min)
    if out is not None:
        write_analysis(scen, verdict, model, Path(out))
    return verdict


def write_analysis(scen: Scenario, verdict: cr.Verdict, model: cr.BoundaryModel, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    report = verdict.to_dict()
    report["scenario"] = scenario_to_dict(scen)
    report["version"] = __version__
    report["discretization"] = {"P": scen.n_points, "K_max": scen.k_max, "Q": scen.n_velocity}
    _write_json(out / "verdict.json", report)

    gens = verdict.generators
    m = model.n_edges
    header = ["mu", "power", "control"] + [f"edge_{j + 1}" for j in range(m)]
    rows = []
    if gens is not None:
        for (mu, n, l), g in zip(verdict.labels, gens):
            rows.append([float(mu), int(n), int(l) + 1] + [float(v) for v in g])
    _write_csv(out / "generators.csv", header, rows)

    if gens is not None and len(gens):
        plotting.plot_generators(gens, out / "generators.png")
    mu = verdict.probe.mu_min if verdict.probe is not None else max(model.mu_floor, 0.0) + 1.0
    x = uniform_grid(model.n_points)
    plotting.plot_profiles(x, model.profiles(mu, model.n_points), out / "profiles.png",
                           certificate=verdict.certificate,
                           title=f"lifted edge profiles, mu = {mu:.3g}")


def _cmd_analyze(args) -> int:
    scen = load_scenario(args.scenario)
    verdict = run_analyze(scen, Path(args.out), args.mode)
    print(f"{verdict.criterion}: {verdict.decision}")
    if verdict.certificate is not None:
        print("certificate:", " ".join(_fmt(float(v)) for v in verdict.certificate))
    return EXIT_NUMERIC if verdict.decision == cr.INCONCLUSIVE else EXIT_OK


# -- simulate -----------------------------------------------------------------

def read_control_csv(path, n_controls: int, positive: bool) -> ControlSignal:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise ScenarioError([("control", "control file needs a header and at least one row")])
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise ScenarioError([("control", f"non-numeric entry: {exc}")]) from exc
    if data.shape[1] != n_controls + 1:
        raise ScenarioError([("control", f"expected columns t,u_1..u_{n_controls}")])
    t = data[:, 0]
    if abs(t[0]) > 1e-12:
        raise ScenarioError([("control", "first sample must be at t = 0")])
    if len(t) > 1:
        dts = np.diff(t)
        if dts.min() <= 0 or np.ptp(dts) > 1e-9 * dts.max():
            raise ScenarioError([("control", "sample times must be uniformly spaced")])
        dt = float(dts.mean())
    else:
        dt = 1.0
    if positive and data[:, 1:].min() < 0:
        raise ScenarioError([("control", "negative control value in positivity mode")])
    return ControlSignal(dt, data[:, 1:], positive=positive)


def positivity_violations(states) -> int:
    scale = max(1.0, max(float(np.abs(z.values).max()) for z in states))
    return sum(int((z.values < -VIOLATION_REL * scale).sum()) for z in states)


def run_simulate(scen: Scenario, control: ControlSignal | None, t_final: float,
                 out: Path | None = None, dt: float | None = None, save_every: int | None = None):
    system = scen.system()
    n_ctrl = system.control.shape[1]
    control = control or ControlSignal.zero(n_ctrl)
    if control.n_controls != n_ctrl:
        raise ScenarioError([("control", f"expected {n_ctrl} control columns")])
    positive = scen.control_positive
    f0 = GridFunction.zeros(scen.n_edges, scen.n_points, 1.0 if scen.kind == "transport" else 2.0)
    caught = []
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        if scen.kind == "transport":
            step = dt or tr.default_step(system, f0.spacing)
            n_steps = int(np.ceil(t_final / step - 1e-9))
            every = save_every or max(1, n_steps // 200)
            traj = tr.simulate_mild(system, f0, control, t_final, dt=step, positive=positive,
                                    save_every=every)
            basis = None
        else:
            step = dt or hm.DEFAULT_DT
            n_steps = int(np.ceil(t_final / step - 1e-9))
            every = save_every or max(1, n_steps // 200)
            basis = hm.SpectralBasis.build(system, scen.k_max, scen.n_points)
            traj = hm.heat_simulate_mild(system, basis, f0, control, t_final, dt=step,
                                         positive=positive, save_every=every)
        caught = [str(w.message) for w in rec]
    summary = {"t_final": float(traj.times[-1]), "dt": float(step), "steps": n_steps,
               "snapshots": len(traj.times), "final_norm": traj.final.norm(),
               "min_value": traj.min_value(),
               "positivity_violations": positivity_violations(traj.states),
               "warnings": caught}
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "trajectory.csv", ["t", "edge", "x", "value"], traj.rows())
        _write_json(out / "summary.json", summary)
        plotting.plot_trajectory(traj.times, traj.states, out / "trajectory.png")
        if basis is not None:
            coeffs = basis.coefficients(traj.final.values)
            _write_csv(out / "coefficients.csv", ["edge", "k", "coeff"],
                       ((j + 1, k, float(c)) for j, row in enumerate(coeffs)
                        for k, c in enumerate(row)))
    return traj, summary


def _cmd_simulate(args) -> int:
    scen = load_scenario(args.scenario)
    n_ctrl = len(scen.control[0])
    control = read_control_csv(args.control, n_ctrl, scen.control_positive) if args.control else None
    _, summary = run_simulate(scen, control, args.t_final, Path(args.out), args.dt, args.save_every)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


# -- szasz --------------------------------------------------------------------

def szasz_check(n_list, v: float = 1.0, n_points: int = 101) -> dict:
    x = uniform_grid(n_points)
    identity = []
    for n in n_list:
        cfg = MirakjanEval(int(n), v)
        ph = cfg.phi(x)
        e0 = np.abs(mirakjan_apply(cfg, lambda y: np.ones_like(y), x) - 1.0).max()
        e1 = np.abs(mirakjan_apply(cfg, lambda y: y, x, in_phi=True) - ph).max()
        e2 = np.abs(mirakjan_apply(cfg, lambda y: y * y, x, in_phi=True) - ph ** 2 - ph / n).max()
        identity.append({"n": int(n), "one": float(e0), "phi": float(e1), "phi2": float(e2)})
    rows = convergence_table(lambda s: s, n_list, x, v)
    table = np.array(rows)
    sup = [float(table[table[:, 0] == n, 4].max()) for n in n_list]
    ratios = [b / a for a, b in zip(sup[:-1], sup[1:])]
    ok = (max(max(r["one"], r["phi"], r["phi2"]) for r in identity) <= 1e-10
          and all(r <= 0.75 for r in ratios))
    return {"identity_errors": identity, "sup_errors": sup, "ratios": ratios, "ok": bool(ok),
            "rows": rows}


def _cmd_szasz(args) -> int:
    res = szasz_check(args.n_list, args.v, args.points)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "szasz.csv", ["n", "x", "M_n f", "f", "error"],
               ((int(n), float(x), float(a), float(f), float(e)) for n, x, a, f, e in res["rows"]))
    plotting.plot_convergence(args.n_list, np.array(res["sup_errors"]), out / "szasz_convergence.png")
    summary = {k: v for k, v in res.items() if k != "rows"}
    _write_json(out / "szasz_summary.json", summary)
    for r in res["identity_errors"]:
        print(f"n={r['n']:4d}  |M1-1|={r['one']:.2e}  |Mphi-phi|={r['phi']:.2e}  "
              f"|Mphi2-phi2-phi/n|={r['phi2']:.2e}")
    print("sup errors:", " ".join(f"{e:.4g}" for e in res["sup_errors"]))
    print("ratios:", " ".join(f"{r:.4f}" for r in res["ratios"]))
    if args.check and not res["ok"]:
        return EXIT_NUMERIC
    return EXIT_OK


# -- selftest -----------------------------------------------------------------

def selftest() -> list[tuple[str, bool]]:
    results = []
    rep = cone_member([[1, 1], [1, 0]], [0, 1])
    results.append(("cone certificate re-checks", (not rep.verdict) and recheck(rep, [[1, 1], [1, 0]])))
    results.append(("orthant test on identity", cone_equals_positive_orthant(np.eye(3)).verdict))
    cyc = load_scenario(bundled("cycle3"))
    v = run_analyze(cyc)
    results.append(("3-cycle positive controllable", v.decision == cr.CONTROLLABLE))
    heat = load_scenario(bundled("heat_path"))
    results.append(("heat path positive controllable",
                    run_analyze(heat).decision == cr.CONTROLLABLE))
    v1 = run_analyze(heat, mode=cr.CONTROL_CONSTRAINED)
    results.append(("heat path control-constrained not controllable",
                    v1.decision == cr.NOT_CONTROLLABLE and v1.diagnostics["certificate_recheck"]))
    results.append(("szasz identities", szasz_check([8, 16, 32])["ok"]))
    return results


def _cmd_selftest(args) -> int:
    results = selftest()
    for name, ok in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return EXIT_OK if all(ok for _, ok in results) else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="posctrl", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="decide controllability for a scenario")
    a.add_argument("--scenario", required=True)
    a.add_argument("--out", default="posctrl_out")
    a.add_argument("--mode", choices=cr.MODES, default=None, help="override the scenario mode")
    a.set_defaults(func=_cmd_analyze)

    s = sub.add_parser("simulate", help="simulate the controlled network from a zero state")
    s.add_argument("--scenario", required=True)
    s.add_argument("--control", default=None, help="CSV with columns t,u_1..u_n")
    s.add_argument("--t-final", type=float, required=True)
    s.add_argument("--dt", type=float, default=None)
    s.add_argument("--save-every", type=int, default=None)
    s.add_argument("--out", default="posctrl_out")
    s.set_defaults(func=_cmd_simulate)

    z = sub.add_parser("szasz", help="warped Szasz-Mirakjan identities and convergence")
    z.add_argument("--check", action="store_true", help="exit 3 if a check fails")
    z.add_argument("--n-list", type=int, nargs="+", default=[8, 16, 32, 64, 128])
    z.add_argument("--v", type=float, default=1.0)
    z.add_argument("--points", type=int, default=101)
    z.add_argument("--out", default="posctrl_out")
    z.set_defaults(func=_cmd_szasz)

    t = sub.add_parser("selftest", help="quick end-to-end sanity checks")
    t.set_defaults(func=_cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        for path, msg in exc.problems:
            print(f"invalid input at {path or '<root>'}: {msg}", file=sys.stderr)
        return EXIT_INPUT
    except (tr.TransportError, hm.HeatError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (LPError, SpectralError, TailError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
