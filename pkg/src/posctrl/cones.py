"""Conic-hull membership, polar-cone triviality and orthant equality with certificates.

All three questions reduce to the same linear program: for a target ``t``,

    maximize <t, phi>  subject to  <g_k, phi> <= 0 for every generator,  |phi|_inf <= 1.

The optimum is ``min_{lam >= 0} || t - sum_k lam_k g_k ||_1``, so ``t`` is in the
closed conic hull iff the optimum is (numerically) zero. A positive optimum comes
with ``phi``, a separating functional; a zero optimum comes with the LP row
multipliers ``lam``, the nonnegative combination.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lp import solve_bounded_lp

DEFAULT_TOL = 1e-9
GRID_TOL = 1e-6


@dataclass
class ConeReport:
    """Outcome of a cone question.

    ``kind`` tells how to read the certificate:

    * ``"separating"``: ``<g, phi> <= tol`` for all generators and ``phi``
      witnesses the failure (``<target, phi> > tol``, ``phi != 0``, or a
      positive coordinate, depending on the question).
    * ``"orthant_violation"``: ``phi = -e_i`` is <= 0 yet pairs positively with a
      generator that leaves the positive orthant.
    * ``"combination"``: the verdict is true and ``coefficients`` holds
      nonnegative weights (one row per target direction for the multi-target
      questions).
    """

    question: str
    verdict: bool
    tol: float
    residual: float = 0.0
    certificate: np.ndarray | None = None
    coefficients: np.ndarray | None = None
    kind: str = "combination"
    failed_direction: np.ndarray | None = None
    target: np.ndarray | None = None
    lp_iterations: int = 0
    extra: dict = field(default_factory=dict)


def _as_generators(generators, dim=None) -> np.ndarray:
    G = np.asarray(generators, dtype=float)
    if G.size == 0:
        if dim is None:
            raise ValueError("dimension required for an empty generator set")
        return np.zeros((0, dim))
    G = np.atleast_2d(G)
    if dim is not None and G.shape[1] != dim:
        raise ValueError(f"generators have dimension {G.shape[1]}, expected {dim}")
    if not np.all(np.isfinite(G)):
        raise ValueError("generators must be finite")
    return G


def _normalized(G):
    norms = np.abs(G).max(axis=1) if len(G) else np.zeros(0)
    keep = norms > 0
    return G[keep] / norms[keep, None], norms, keep


def cone_member(generators, target, tol: float = DEFAULT_TOL) -> ConeReport:
    t = np.asarray(target, dtype=float).ravel()
    G = _as_generators(generators, t.size)
    if tol <= 0:
        raise ValueError("tol must be positive")
    Gn, norms, keep = _normalized(G)
    m, d = Gn.shape
    lam = np.zeros(len(G))

    if m == 0:
        value = float(np.abs(t).sum())
        if value <= tol:
            return ConeReport("member", True, tol, residual=value, coefficients=lam, target=t)
        return ConeReport("member", False, tol, residual=value, certificate=np.sign(t),
                          kind="separating", failed_direction=t, target=t)

    A = np.hstack([Gn, np.eye(m)])
    lo = np.concatenate([-np.ones(d), np.zeros(m)])
    hi = np.concatenate([np.ones(d), np.full(m, np.inf)])
    c = np.concatenate([t, np.zeros(m)])
    res = solve_bounded_lp(c, A, np.zeros(m), lo, hi)
    phi = res.x[:d]
    if res.objective <= tol:
        lam[keep] = np.clip(res.duals, 0.0, None) / norms[keep]
        resid = float(np.abs(G.T @ lam - t).max(initial=0.0))
        return ConeReport("member", True, tol, residual=resid, coefficients=lam, target=t,
                          lp_iterations=res.iterations)
    return ConeReport("member", False, tol, residual=res.objective, certificate=phi,
                      kind="separating", failed_direction=t, target=t,
                      lp_iterations=res.iterations)


def _basis_targets(d, signs):
    for i in range(d):
        for s in signs:
            e = np.zeros(d)
            e[i] = s
            yield e


def polar_is_trivial(generators, tol: float = DEFAULT_TOL, dim: int | None = None) -> ConeReport:
    """True iff the closed conic hull of ``generators`` is the whole space."""
    G = _as_generators(generators, dim)
    d = G.shape[1]
    coeffs, resid, iters = [], 0.0, 0
    for e in _basis_targets(d, (1.0, -1.0)):
        rep = cone_member(G, e, tol)
        iters += rep.lp_iterations
        if not rep.verdict:
            rep.question = "full_space"
            rep.lp_iterations = iters
            return rep
        coeffs.append(rep.coefficients)
        resid = max(resid, rep.residual)
    return ConeReport("full_space", True, tol, residual=resid,
                      coefficients=np.array(coeffs).reshape(2 * d, len(G)),
                      lp_iterations=iters)


def cone_equals_positive_orthant(generators, tol: float = DEFAULT_TOL,
                                 dim: int | None = None) -> ConeReport:
    """True iff the closed conic hull of ``generators`` is exactly the positive orthant."""
    G = _as_generators(generators, dim)
    d = G.shape[1]
    if len(G):
        k, i = np.unravel_index(np.argmin(G), G.shape)
        if G[k, i] < -tol:
            phi = np.zeros(d)
            phi[i] = -1.0
            return ConeReport("equals_positive_orthant", False, tol, residual=float(-G[k, i]),
                              certificate=phi, kind="orthant_violation",
                              extra={"generator": int(k)})
    coeffs, resid, iters = [], 0.0, 0
    for e in _basis_targets(d, (1.0,)):
        rep = cone_member(G, e, tol)
        iters += rep.lp_iterations
        if not rep.verdict:
            rep.question = "equals_positive_orthant"
            rep.lp_iterations = iters
            return rep
        coeffs.append(rep.coefficients)
        resid = max(resid, rep.residual)
    return ConeReport("equals_positive_orthant", True, tol, residual=resid,
                      coefficients=np.array(coeffs).reshape(d, len(G)),
                      lp_iterations=iters)


def recheck(report: ConeReport, generators, slack: float | None = None) -> bool:
    """Re-verify a report's certificate or coefficients by direct arithmetic."""
    G = np.atleast_2d(np.asarray(generators, dtype=float))
    tol = report.tol if slack is None else slack
    if report.verdict:
        if report.coefficients is None:
            return False
        lam = np.atleast_2d(report.coefficients)
        if lam.size and lam.min() < 0:
            return False
        if report.question == "member":
            combo = G.T @ lam[0] if G.size else np.zeros_like(report.target)
            return bool(np.abs(combo - report.target).max(initial=0.0) <= tol)
        d = G.shape[1]
        signs = (1.0, -1.0) if report.question == "full_space" else (1.0,)
        return all(np.abs(G.T @ lam[r] - t).max() <= tol
                   for r, t in enumerate(_basis_targets(d, signs)))
    phi = report.certificate
    if phi is None:
        return False
    pair = G @ phi if G.size else np.zeros(0)
    if report.kind == "orthant_violation":
        return bool(phi.max() <= 0 and pair.max(initial=-np.inf) > tol)
    if pair.size and pair.max() > tol:
        return False
    if report.question == "member":
        return bool(report.failed_direction @ phi > tol)
    if report.question == "full_space":
        return bool(np.abs(phi).max() > tol)
    return bool(phi.max() > tol)
