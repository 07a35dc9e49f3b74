"""Warped Szasz-Mirakjan operators and an exponential-family positivity probe.

``szasz_apply`` is the classical operator
``S_n(g; y) = exp(-n y) sum_k g(k/n) (n y)^k / k!`` on ``y >= 0``. The warped
variant evaluates it at ``y = phi(x) = (1 - x)/v`` and reads ``g = f o phi^-1``,
where ``phi^-1(y) = 1 - v y`` is clamped to ``0`` once ``y > 1/v``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .grid import trapezoid_weights, uniform_grid

TAIL_TOL = 1e-12


class TailError(RuntimeError):
    pass


def default_cutoff(rate) -> np.ndarray:
    rate = np.asarray(rate, dtype=float)
    return np.ceil(rate + 10.0 * np.sqrt(rate) + 20.0).astype(int)


@dataclass(frozen=True)
class MirakjanEval:
    n: int
    v: float = 1.0
    tail_tol: float = TAIL_TOL

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("order n must be at least 1")
        if self.v <= 0:
            raise ValueError("velocity must be positive")

    def phi(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(x < 1.0, (1.0 - x) / self.v, 0.0)

    def phi_inv(self, y) -> np.ndarray:
        return np.clip(1.0 - self.v * np.asarray(y, dtype=float), 0.0, 1.0)


def _as_callable(f):
    if callable(f):
        return f
    vals = np.asarray(f, dtype=float)
    xs = uniform_grid(len(vals))
    return lambda x: np.interp(x, xs, vals)


def szasz_apply(g, y, n: int, tail_tol: float = TAIL_TOL, return_tail: bool = False):
    """Poisson-weighted average of ``g(k/n)``; truncated at ``default_cutoff(n y)``."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(y < 0):
        raise ValueError("szasz operator is defined for y >= 0")
    rate = n * y
    cut = default_cutoff(rate)
    tails = poisson.sf(cut, rate)
    if tails.max(initial=0.0) > tail_tol:
        raise TailError(f"series tail {tails.max():.2e} exceeds {tail_tol:.0e}")
    out = np.empty_like(y)
    for i, (lam, kc) in enumerate(zip(rate, cut)):
        k = np.arange(kc + 1)
        if lam == 0:
            out[i] = float(np.asarray(g(np.zeros(1)))[0])
            continue
        logw = -lam + k * np.log(lam) - gammaln(k + 1.0)
        out[i] = np.exp(logw) @ np.asarray(g(k / n), dtype=float)
    if return_tail:
        return out, float(tails.max(initial=0.0))
    return out


def mirakjan_apply(cfg: MirakjanEval, f, x, in_phi: bool = False):
    """``M_n(f; x)``.

    With ``in_phi=True`` the callable ``f`` is read as a function of the warped
    variable, i.e. it is evaluated at ``k/n`` directly (``f o phi^-1`` already
    applied). This is the form in which the Korovkin test functions are stated.
    """
    f = _as_callable(f)
    g = f if in_phi else (lambda y: f(cfg.phi_inv(y)))
    return szasz_apply(g, cfg.phi(x), cfg.n, cfg.tail_tol)


def convergence_table(f, n_list, x, v: float = 1.0):
    """Rows ``(n, x, M_n f, f, |error|)`` for plotting and CSV export."""
    f = _as_callable(f)
    x = np.asarray(x, dtype=float)
    rows = []
    for n in n_list:
        approx = mirakjan_apply(MirakjanEval(int(n), v), f, x)
        exact = f(x)
        rows.extend(zip([int(n)] * len(x), x, approx, exact, np.abs(approx - exact)))
    return rows


def sup_errors(f, n_list, x, v: float = 1.0) -> np.ndarray:
    rows = np.array(convergence_table(f, n_list, x, v))
    return np.array([rows[rows[:, 0] == n, 4].max() for n in n_list])


@dataclass
class DensityReport:
    n_values: np.ndarray
    pairings: np.ndarray          # (n_duals, len(n_values))
    dual_nonnegative: np.ndarray  # per dual
    smallest_violating_n: list    # per dual, None if every pairing is >= -tol
    consistent: np.ndarray        # False where all pairings are >= 0 yet the dual dips below 0

    def to_dict(self) -> dict:
        return {"n_values": self.n_values.tolist(), "pairings": self.pairings.tolist(),
                "dual_nonnegative": self.dual_nonnegative.tolist(),
                "smallest_violating_n": self.smallest_violating_n,
                "consistent": self.consistent.tolist()}


def exponential_family_density_check(v: float, trial_duals, n_range, n_points: int = 4001,
                                     tol: float = 1e-12) -> DensityReport:
    """Pair each dual ``g`` with ``exp(-n (1 - x)/v)`` for every ``n`` in ``n_range``.

    The claim under test: nonnegative pairings for all ``n`` force ``g >= 0``.
    A dual whose pairings are all nonnegative while its samples dip below
    ``-tol`` is reported as inconsistent with that claim.
    """
    if v <= 0:
        raise ValueError("velocity must be positive")
    n_values = np.asarray(list(n_range), dtype=float)
    pair_rows, nonneg, first_bad, consistent = [], [], [], []
    for g in trial_duals:
        if callable(g):
            x = uniform_grid(n_points)
            vals = np.asarray(g(x), dtype=float) * np.ones_like(x)
        else:
            vals = np.asarray(g, dtype=float).ravel()
            x = uniform_grid(len(vals))
        w = trapezoid_weights(len(x))
        kern = np.exp(-np.outer(n_values, 1.0 - x) / v)
        p = kern @ (w * vals)
        bad = np.flatnonzero(p < -tol)
        is_nonneg = bool(vals.min() >= -tol)
        pair_rows.append(p)
        nonneg.append(is_nonneg)
        first_bad.append(None if bad.size == 0 else int(n_values[bad[0]]))
        consistent.append(bad.size > 0 or is_nonneg)
    return DensityReport(n_values, np.array(pair_rows), np.array(nonneg), first_bad,
                         np.array(consistent))
