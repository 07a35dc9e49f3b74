"""Small dense linear programs: bounded-variable primal simplex with Bland's rule.

Solves ``max c @ x  s.t.  A @ x == b,  lo <= x <= hi`` with finite lower bounds.
Problems in this package have at most a few hundred rows and columns, so each
iteration refactorizes the basis from scratch instead of updating it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_PIVOT_TOL = 1e-11
_COST_TOL = 1e-10
_FEAS_TOL = 1e-9


class LPError(RuntimeError):
    pass


class LPIterationLimit(LPError):
    pass


@dataclass
class LPResult:
    x: np.ndarray
    duals: np.ndarray  # row multipliers y with  c - A.T @ y  = reduced costs
    objective: float
    iterations: int


class _Simplex:
    def __init__(self, A, b, lo, hi, max_iter):
        self.A = A
        self.b = b
        self.lo = lo
        self.hi = hi
        self.m, self.n = A.shape
        self.max_iter = max_iter
        self.iterations = 0

    def _basic_values(self, basis, x):
        nonbasic = np.ones(self.n, dtype=bool)
        nonbasic[basis] = False
        rhs = self.b - self.A[:, nonbasic] @ x[nonbasic]
        return np.linalg.solve(self.A[:, basis], rhs)

    def run(self, cost, basis, x, at_upper, allowed):
        """Iterate to optimality for ``cost``; mutates basis/x/at_upper in place."""
        A, lo, hi = self.A, self.lo, self.hi
        while True:
            self.iterations += 1
            if self.iterations > self.max_iter:
                raise LPIterationLimit(f"simplex exceeded {self.max_iter} iterations")
            B = A[:, basis]
            x[basis] = self._basic_values(basis, x)
            y = np.linalg.solve(B.T, cost[basis])
            d = cost - A.T @ y
            in_basis = np.zeros(self.n, dtype=bool)
            in_basis[basis] = True

            entering = -1
            for j in range(self.n):
                if in_basis[j] or not allowed[j] or hi[j] - lo[j] <= 0:
                    continue
                if (not at_upper[j] and d[j] > _COST_TOL) or (at_upper[j] and d[j] < -_COST_TOL):
                    entering = j
                    break
            if entering < 0:
                return y

            j = entering
            s = -1.0 if at_upper[j] else 1.0
            alpha = np.linalg.solve(B, A[:, j])
            theta = hi[j] - lo[j]
            leave_pos = -1
            leave_to_upper = False
            for pos, var in enumerate(basis):
                rate = s * alpha[pos]
                if rate > _PIVOT_TOL:
                    t = (x[var] - lo[var]) / rate
                    to_upper = False
                elif rate < -_PIVOT_TOL and np.isfinite(hi[var]):
                    t = (hi[var] - x[var]) / -rate
                    to_upper = True
                else:
                    continue
                t = max(t, 0.0)
                # Bland: among ties prefer the smallest variable index
                if t < theta - 1e-14 or (leave_pos >= 0 and abs(t - theta) <= 1e-14
                                         and var < basis[leave_pos]):
                    theta, leave_pos, leave_to_upper = t, pos, to_upper
            if not np.isfinite(theta):
                raise LPError("linear program is unbounded")

            x[basis] -= s * theta * alpha
            x[j] += s * theta
            if leave_pos < 0:
                at_upper[j] = not at_upper[j]
                x[j] = hi[j] if at_upper[j] else lo[j]
                continue
            old = basis[leave_pos]
            at_upper[old] = leave_to_upper
            x[old] = hi[old] if leave_to_upper else lo[old]
            basis[leave_pos] = j
            at_upper[j] = False


def solve_bounded_lp(c, A, b, lo, hi, max_iter: int | None = None) -> LPResult:
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    m, n = A.shape
    if not np.all(np.isfinite(lo)):
        raise ValueError("lower bounds must be finite")
    if np.any(hi < lo):
        raise LPError("empty variable bounds")
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000

    x0 = lo.copy()
    resid = b - A @ x0
    # Reuse unit slack columns as the starting basis where their value is feasible.
    basis: list[int] = []
    art_rows: list[int] = []
    unit_cols = {}
    for j in range(n):
        col = A[:, j]
        nz = np.flatnonzero(col)
        if len(nz) == 1 and col[nz[0]] == 1.0 and lo[j] == 0.0 and np.isinf(hi[j]):
            unit_cols.setdefault(int(nz[0]), j)
    for k in range(m):
        j = unit_cols.get(k)
        if j is not None and resid[k] >= 0:
            basis.append(j)
        else:
            basis.append(-1)
            art_rows.append(k)

    n_art = len(art_rows)
    A_full = np.hstack([A, np.zeros((m, n_art))])
    for a, k in enumerate(art_rows):
        A_full[k, n + a] = 1.0 if resid[k] >= 0 else -1.0
        basis[k] = n + a
    lo_full = np.concatenate([lo, np.zeros(n_art)])
    hi_full = np.concatenate([hi, np.full(n_art, np.inf)])
    x = np.concatenate([x0, np.zeros(n_art)])
    at_upper = np.zeros(n + n_art, dtype=bool)
    allowed = np.ones(n + n_art, dtype=bool)
    solver = _Simplex(A_full, b, lo_full, hi_full, max_iter)

    if n_art:
        phase1 = np.concatenate([np.zeros(n), -np.ones(n_art)])
        solver.run(phase1, basis, x, at_upper, allowed)
        x[basis] = solver._basic_values(basis, x)
        if x[n:].sum() > _FEAS_TOL * max(1.0, np.abs(b).max(initial=0.0)):
            raise LPError("linear program is infeasible")
        hi_full[n:] = 0.0
        x[n:] = 0.0
        allowed[n:] = False

    cost = np.concatenate([c, np.zeros(n_art)])
    y = solver.run(cost, basis, x, at_upper, allowed)
    x[basis] = solver._basic_values(basis, x)
    xs = np.clip(x[:n], lo, hi)
    return LPResult(xs, y, float(c @ xs), solver.iterations)
