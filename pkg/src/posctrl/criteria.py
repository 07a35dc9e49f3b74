"""Frequency-domain controllability decisions under positivity constraints.

Both network models have a separable Dirichlet lifting: boundary data ``g``
is lifted to the grid function ``profile_mu[j](x) * (L g)_j``. A generator of
the reachable cone at frequency ``mu`` is therefore an edge-wise amplitude
vector ``a`` in ``R^M`` times fixed positive profiles, and the cone questions
are asked about amplitudes:

* per frequency, the amplitudes themselves. A positive verdict says every
  edge can be fed independently with nonnegative boundary data. It is not a
  claim about the fixed-shape profiles alone: their positive combinations do
  not exhaust the nonnegative functions on an edge (``cos(2 pi x)`` pairs
  nonnegatively with every decaying exponential);
* pooled over frequencies, the amplitudes weighted by the profile masses. A
  separating vector there is an edge-wise constant test function that pairs
  nonpositively with every sampled grid generator, i.e. a genuine certificate.

Anything in between is reported as ``inconclusive``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import heat as heat_mod
from . import transport as tr
from .cones import DEFAULT_TOL, ConeReport, cone_equals_positive_orthant, polar_is_trivial, recheck
from .graph import incidence_matrices, is_strongly_connected
from .grid import trapezoid_weights
from .spectral import spectral_radius

POSITIVE = "positive"
CONTROL_CONSTRAINED = "control_constrained"
MODES = (POSITIVE, CONTROL_CONSTRAINED)

CONTROLLABLE = "controllable"
NOT_CONTROLLABLE = "not_controllable"
INCONCLUSIVE = "inconclusive"

TARGET_RADIUS = 0.9
DEFAULT_MU_COUNT = 8
MU_SPAN = 100.0
COND_LIMIT = 1e12
CERT_SLACK = 1e-8


class PreconditionWarning(UserWarning):
    pass


@dataclass
class BoundaryModel:
    """What the decision procedures need to know about a network system."""

    kind: str
    n_edges: int
    profiles: Callable[[float, int], np.ndarray]   # (mu, P) -> (M, P), positive
    readout: np.ndarray                            # L: boundary data -> edge amplitudes
    transfer: Callable[[float], np.ndarray]
    control: np.ndarray
    mu_floor: float
    strict_floor: bool
    positive: bool
    n_points: int = 201
    norm_p: float = 2.0

    def check_mu(self, mu: float) -> bool:
        return mu > self.mu_floor if self.strict_floor else mu >= self.mu_floor


def transport_model(sys: tr.TransportSystem, n_points: int = tr.DEFAULT_POINTS) -> BoundaryModel:
    _, _, out_w = incidence_matrices(sys.graph)
    return BoundaryModel(
        kind="transport", n_edges=sys.graph.n_edges,
        profiles=lambda mu, P: tr.edge_profiles(sys, mu, P),
        readout=out_w.T, transfer=lambda mu: tr.transfer_matrix(sys, mu),
        control=sys.control, mu_floor=sys.mu_floor, strict_floor=False,
        positive=bool(sys.control.min() >= 0), n_points=n_points, norm_p=1.0)


def heat_model(net: heat_mod.HeatNetwork, n_points: int = heat_mod.DEFAULT_POINTS) -> BoundaryModel:
    return BoundaryModel(
        kind="heat", n_edges=net.n_edges,
        profiles=lambda mu, P: heat_mod.xi_profiles(net, mu, P),
        readout=np.eye(net.n_edges), transfer=lambda mu: heat_mod.heat_transfer(net, mu),
        control=net.control, mu_floor=net.spectral_bound, strict_floor=True,
        positive=net.positive, n_points=n_points, norm_p=2.0)


@dataclass
class FrequencyProbe:
    mu_samples: np.ndarray
    n_max: int
    radius_at_min: float
    radii: np.ndarray

    @property
    def mu_min(self) -> float:
        return float(self.mu_samples[0])

    def tail_bound(self) -> float:
        """Neumann remainder ``r^(n_max+1) / (1 - r)`` at the smallest frequency."""
        r = self.radius_at_min
        return float("inf") if r >= 1 else float(r ** (self.n_max + 1) / (1 - r))

    def to_dict(self) -> dict:
        return {"mu_samples": [float(m) for m in self.mu_samples], "n_max": int(self.n_max),
                "radius_at_mu_min": float(self.radius_at_min),
                "radii": [float(r) for r in self.radii], "neumann_tail": self.tail_bound()}


def choose_probe(model: BoundaryModel, mu_min: float | None = None,
                 count: int = DEFAULT_MU_COUNT, n_max: int | None = None,
                 target_radius: float = TARGET_RADIUS) -> FrequencyProbe:
    base = max(model.mu_floor, 0.0)
    if mu_min is None:
        mu_min = base + 2.0 ** 14
        for off in 2.0 ** np.arange(-6, 15):
            if spectral_radius(model.transfer(base + off)) <= target_radius:
                mu_min = base + off
                break
    elif not model.check_mu(mu_min):
        raise ValueError(f"mu_min={mu_min} is not above the spectral floor {model.mu_floor}")
    if count < 1:
        raise ValueError("need at least one frequency sample")
    gap = mu_min - base
    if count == 1 or gap <= 0:
        mus = mu_min + np.arange(count, dtype=float)
    else:
        mus = base + np.geomspace(gap, MU_SPAN * gap, count)
    radii = np.array([spectral_radius(model.transfer(m)) for m in mus])
    if n_max is None:
        n_max = max(model.n_edges - 1, 16)
    return FrequencyProbe(mus, int(n_max), float(radii[0]), radii)


@dataclass
class Verdict:
    mode: str
    decision: str
    criterion: str
    tol: float
    probe: FrequencyProbe | None = None
    certificate: np.ndarray | None = None
    report: ConeReport | None = None
    generators: np.ndarray | None = None           # amplitude rows
    labels: list = field(default_factory=list)     # (mu, n, control) per row
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"mode": self.mode, "decision": self.decision, "criterion": self.criterion,
               "tol": self.tol, "probe": None if self.probe is None else self.probe.to_dict(),
               "certificate": None if self.certificate is None else _floats(self.certificate),
               "diagnostics": _jsonable(self.diagnostics)}
        if self.report is not None:
            rep = self.report
            out["cone"] = {"question": rep.question, "verdict": bool(rep.verdict),
                           "kind": rep.kind, "residual": float(rep.residual),
                           "lp_iterations": int(rep.lp_iterations)}
            if rep.coefficients is not None and rep.verdict:
                out["cone"]["coefficients"] = np.atleast_2d(rep.coefficients).tolist()
        return out


def _floats(a):
    return [float(x) for x in np.ravel(a)]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


# -- generator families -------------------------------------------------------

def neumann_amplitudes(model: BoundaryModel, mu: float, n_max: int):
    """Rows ``L A(mu)^n K e_l`` for ``n = 0..n_max`` with their ``(n, l)`` labels."""
    A = model.transfer(mu)
    K = model.control
    rows, labels = [], []
    An = np.eye(len(A))
    for n in range(n_max + 1):
        block = model.readout @ An @ K
        for l in range(K.shape[1]):
            rows.append(block[:, l])
            labels.append((n, l))
        An = A @ An
    return np.array(rows), labels


def resolvent_amplitudes(model: BoundaryModel, mu: float):
    """Rows ``L (I - A(mu))^{-1} K e_l``; ``None`` when ``I - A(mu)`` is near singular."""
    A = model.transfer(mu)
    M = np.eye(len(A)) - A
    if np.linalg.cond(M) > COND_LIMIT:
        return None, []
    block = model.readout @ np.linalg.solve(M, model.control)
    return block.T.copy(), [(-1, l) for l in range(block.shape[1])]


def _profile_mass(model: BoundaryModel, mu: float) -> np.ndarray:
    prof = model.profiles(mu, model.n_points)
    return prof @ trapezoid_weights(model.n_points)


def _grid_norm(values: np.ndarray, p: float) -> float:
    w = trapezoid_weights(values.shape[1])
    return float((np.abs(values) ** p @ w).sum() ** (1.0 / p))


def _grid_reproduction(model: BoundaryModel, mu: float, amps: np.ndarray,
                       coeffs: np.ndarray, targets: np.ndarray) -> float:
    """Largest grid-norm error of ``sum_k coeffs[r,k] g_k`` against ``target_r x profile``."""
    prof = model.profiles(mu, model.n_points)
    worst = 0.0
    for lam, t in zip(np.atleast_2d(coeffs), targets):
        combo = (lam @ amps)[:, None] * prof
        worst = max(worst, _grid_norm(combo - t[:, None] * prof, model.norm_p))
    return worst


def _certificate_check(model: BoundaryModel, mus, amp_sets, phi) -> float:
    """Largest pairing of the edge-constant ``phi`` with the sampled grid generators.

    Generators are scaled to unit sup-norm so the number is comparable to a
    tolerance.
    """
    w = trapezoid_weights(model.n_points)
    worst = -np.inf
    for mu, amps in zip(mus, amp_sets):
        prof = model.profiles(mu, model.n_points)
        for a in amps:
            g = a[:, None] * prof
            scale = np.abs(g).max()
            if scale == 0:
                continue
            worst = max(worst, float((((g / scale) @ w) * phi).sum()))
    return worst if np.isfinite(worst) else 0.0


def _basis_targets(d: int, signs) -> np.ndarray:
    return np.array([s * e for e in np.eye(d) for s in signs])


# -- decisions ----------------------------------------------------------------

def _decide(model: BoundaryModel, probe: FrequencyProbe, tol: float, mode: str,
            criterion: str) -> Verdict:
    M = model.n_edges
    if mode == POSITIVE:
        question = cone_equals_positive_orthant
        targets = _basis_targets(M, (1.0,))
    else:
        question = polar_is_trivial
        targets = _basis_targets(M, (1.0, -1.0))

    amp_sets, label_rows, per_mu = [], [], []
    for mu in probe.mu_samples:
        if mode == POSITIVE:
            amps, labels = neumann_amplitudes(model, mu, probe.n_max)
        else:
            amps, labels = resolvent_amplitudes(model, mu)
            if amps is None:
                return Verdict(mode, INCONCLUSIVE, criterion, tol, probe, diagnostics={
                    "reason": f"I - A(mu) numerically singular at mu={mu:.6g}"})
        amp_sets.append(amps)
        label_rows.extend((float(mu), n, l) for n, l in labels)
        per_mu.append(question(amps, tol, dim=M))

    all_amps = np.vstack(amp_sets)
    weighted = np.vstack([amps * _profile_mass(model, mu)[None, :]
                          for mu, amps in zip(probe.mu_samples, amp_sets)])
    pooled = question(weighted, tol, dim=M)
    verdicts = [bool(r.verdict) for r in per_mu]
    diag = {"per_mu_verdicts": verdicts, "mu_consistent": len(set(verdicts)) == 1,
            "pooled_verdict": bool(pooled.verdict), "neumann_tail": probe.tail_bound(),
            "grid_points": model.n_points}

    if all(verdicts):
        diag["grid_reproduction_error"] = max(
            _grid_reproduction(model, mu, amps, rep.coefficients, targets)
            for mu, amps, rep in zip(probe.mu_samples, amp_sets, per_mu))
        diag["coefficients_recheck"] = all(recheck(r, a) for r, a in zip(per_mu, amp_sets))
        return Verdict(mode, CONTROLLABLE, criterion, tol, probe, report=per_mu[0],
                       generators=all_amps, labels=label_rows, diagnostics=diag)
    if not pooled.verdict:
        phi = np.asarray(pooled.certificate, dtype=float)
        diag["certificate_kind"] = pooled.kind
        diag["certificate_recheck"] = bool(recheck(pooled, weighted))
        diag["max_grid_pairing"] = _certificate_check(model, probe.mu_samples, amp_sets, phi)
        diag["certificate_level"] = "edge_constant"
        return Verdict(mode, NOT_CONTROLLABLE, criterion, tol, probe, certificate=phi,
                       report=pooled, generators=all_amps, labels=label_rows, diagnostics=diag)
    diag["reason"] = "frequency samples disagree and the pooled test yields no certificate"
    return Verdict(mode, INCONCLUSIVE, criterion, tol, probe, report=pooled,
                   generators=all_amps, labels=label_rows, diagnostics=diag)


def decide_theorem2(model: BoundaryModel, probe: FrequencyProbe | None = None,
                    tol: float = DEFAULT_TOL) -> Verdict:
    """Positive controls and positive states: cone of Neumann terms vs. the orthant."""
    probe = probe or choose_probe(model)
    if not model.positive:
        return Verdict(POSITIVE, INCONCLUSIVE, "theorem2", tol, probe, diagnostics={
            "reason": "positive-state criterion needs nonnegative coupling and control"})
    if probe.radius_at_min >= 1.0:
        return Verdict(POSITIVE, INCONCLUSIVE, "theorem2", tol, probe, diagnostics={
            "reason": f"spectral radius {probe.radius_at_min:.6g} >= 1 at mu_min"})
    return _decide(model, probe, tol, POSITIVE, "theorem2")


def decide_theorem1(model: BoundaryModel, probe: FrequencyProbe | None = None,
                    tol: float = DEFAULT_TOL) -> Verdict:
    """Positive controls, unconstrained states: is the polar cone trivial?"""
    probe = probe or choose_probe(model)
    return _decide(model, probe, tol, CONTROL_CONSTRAINED, "theorem1")


def rank_regime_issues(sys: tr.TransportSystem) -> list[str]:
    issues = []
    if not sys.single_velocity:
        issues.append("velocities differ between edges")
    if np.any(sys.q != 0):
        issues.append("nonzero absorption")
    if not is_strongly_connected(sys.graph):
        issues.append("graph is not strongly connected")
    return issues


def decide_transport_rank(sys: tr.TransportSystem, tol: float = DEFAULT_TOL) -> Verdict:
    """Kalman-type test: cone of ``I_out_w.T A^m K e_l`` (m < M) equals the orthant."""
    issues = rank_regime_issues(sys)
    if issues:
        warnings.warn("rank test outside its regime (" + "; ".join(issues)
                      + "); using the frequency test", PreconditionWarning, stacklevel=2)
        v = decide_transport_frequency(sys, tol=tol)
        v.diagnostics["rank_fallback"] = issues
        return v
    gens = tr.rank_generators(sys)
    rep = cone_equals_positive_orthant(gens, tol, dim=sys.graph.n_edges)
    n_ctrl = sys.control.shape[1]
    labels = [(float("nan"), m, l) for m in range(sys.graph.n_edges) for l in range(n_ctrl)]
    diag = {"recheck": bool(recheck(rep, gens))}
    if rep.verdict:
        return Verdict(POSITIVE, CONTROLLABLE, "rank", tol, report=rep, generators=gens,
                       labels=labels, diagnostics=diag)
    return Verdict(POSITIVE, NOT_CONTROLLABLE, "rank", tol, certificate=rep.certificate,
                   report=rep, generators=gens, labels=labels, diagnostics=diag)


def decide_transport_frequency(sys: tr.TransportSystem, probe: FrequencyProbe | None = None,
                               tol: float = DEFAULT_TOL, n_points: int = tr.DEFAULT_POINTS) -> Verdict:
    """Frequency-domain positive-state test for transport networks."""
    model = transport_model(sys, n_points)
    v = decide_theorem2(model, probe, tol)
    v.criterion = "frequency"
    if not rank_regime_issues(sys):
        gens = tr.rank_generators(sys)
        rank_ok = cone_equals_positive_orthant(gens, tol, dim=sys.graph.n_edges).verdict
        v.diagnostics["rank_verdict"] = bool(rank_ok)
        v.diagnostics["rank_agreement"] = (v.decision == CONTROLLABLE) == bool(rank_ok)
    return v


def heat_sign_alternation(net: heat_mod.HeatNetwork, mu: float, k_max: int = 32,
                          quad_tol: float = 1e-8) -> dict:
    """Signs of ``<xi_1 b, cos(k pi x)>`` for the leading edge of a controlled path."""
    b = float(net.control[0].sum())
    rows, ok = [], True
    for k in range(k_max + 1):
        quad = b * heat_mod.xi_cosine_quadrature(net, mu, 0, k)
        closed = b * heat_mod.xi_cosine_coefficient(net, mu, 0, k)
        good = (np.sign(quad) == (-1) ** k * np.sign(b)) and abs(quad - closed) <= quad_tol
        ok &= bool(good)
        rows.append({"k": k, "quadrature": quad, "closed_form": closed, "ok": bool(good)})
    return {"mu": float(mu), "b": b, "holds": ok, "rows": rows}
