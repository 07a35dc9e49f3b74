"""Transport flows on directed networks with Kirchhoff-type boundary coupling.

Each edge is parametrized against the flow: mass enters at ``x = 1`` and leaves
at ``x = 0``. On edge ``j`` the state obeys ``z_t = v_j z_x + q_j z`` where
``q_j`` is the *signed* absorption constant (negative = damping). At a vertex
the outflows are summed, the control is added, and the result is redistributed
to the outgoing edges by their weights:

    z(t, 1) = I_out_w.T @ (I_in @ z(t, 0) + K @ u(t)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .graph import NetworkGraph, adjacency, incidence_matrices, is_strongly_connected
from .grid import ControlSignal, GridFunction, Trajectory, uniform_grid

DEFAULT_POINTS = 201
DEFAULT_VELOCITY_NODES = 64
_SHIFT_TOL = 1e-9


class TransportError(ValueError):
    pass


@dataclass(frozen=True)
class TransportSystem:
    graph: NetworkGraph
    velocity: float | tuple = 1.0
    absorption: tuple | None = None
    absorption_sign: int = -1
    control: np.ndarray | None = None
    positive_control: bool = True

    def __post_init__(self):
        m = self.graph.n_edges
        v = np.broadcast_to(np.asarray(self.velocity, dtype=float), (m,)).copy()
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise TransportError("velocities must be strictly positive")
        object.__setattr__(self, "velocity", float(v[0]) if np.ndim(self.velocity) == 0
                           else tuple(v))
        q = np.zeros(m) if self.absorption is None else np.broadcast_to(
            np.asarray(self.absorption, dtype=float), (m,)).copy()
        if np.any(q < 0):
            raise TransportError("absorption magnitudes must be nonnegative")
        object.__setattr__(self, "absorption", tuple(q))
        if self.absorption_sign not in (-1, 1):
            raise TransportError("absorption_sign must be -1 (damping) or +1 (growth)")
        K = np.zeros((self.graph.n_vertices, 1)) if self.control is None else \
            np.atleast_2d(np.asarray(self.control, dtype=float))
        if K.shape[0] != self.graph.n_vertices:
            raise TransportError(f"control matrix needs {self.graph.n_vertices} rows")
        if self.positive_control and K.min() < 0:
            raise TransportError("control matrix has negative entries in positivity mode")
        object.__setattr__(self, "control", K)

    @property
    def v(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.velocity, dtype=float), (self.graph.n_edges,))

    @property
    def q(self) -> np.ndarray:
        """Signed per-edge absorption constants."""
        return self.absorption_sign * np.asarray(self.absorption)

    @property
    def single_velocity(self) -> bool:
        return bool(np.all(self.v == self.v[0]))

    @property
    def mu_floor(self) -> float:
        return float(self.q.max())

    def _check_mu(self, mu):
        if not np.isfinite(mu) or mu < self.mu_floor:
            raise TransportError(f"mu={mu} below the admissible floor {self.mu_floor}")


def free_semigroup_apply(sys: TransportSystem, f: GridFunction, t: float) -> GridFunction:
    """Outflow semigroup with zero inflow: shift toward ``x = 0`` and damp.

    For ``t > 0`` the inflow end carries the (zero) boundary data, so values
    survive only where ``x + v t < 1``.
    """
    if t < 0:
        raise TransportError("t must be nonnegative")
    if t == 0:
        return f.copy()
    P = f.n_points
    h = f.spacing
    x = f.x
    out = np.zeros_like(f.values)
    for j in range(f.n_edges):
        shift = sys.v[j] * t
        decay = np.exp(sys.q[j] * t)
        s = shift / h
        if abs(s - round(s)) < _SHIFT_TOL:
            s = int(round(s))
            if s < P - 1:
                out[j, :P - 1 - s] = decay * f.values[j, s:P - 1]
        else:
            xs = x + shift
            inside = xs < 1.0
            out[j, inside] = decay * np.interp(xs[inside], x, f.values[j])
    return GridFunction(out, f.norm_p)


def edge_profiles(sys: TransportSystem, mu: float, n_points: int = DEFAULT_POINTS) -> np.ndarray:
    """``exp((q_j - mu) (1 - x) / v_j)`` sampled per edge, shape (M, P)."""
    sys._check_mu(mu)
    x = uniform_grid(n_points)
    rate = (sys.q - mu) / sys.v
    return np.exp(rate[:, None] * (1.0 - x)[None, :])


def dirichlet_apply(sys: TransportSystem, mu: float, d, n_points: int = DEFAULT_POINTS) -> GridFunction:
    """Lift vertex data ``d`` to the kernel of ``mu - A_m`` with trace ``d`` at ``x = 1``."""
    d = np.asarray(d, dtype=float).ravel()
    if d.size != sys.graph.n_vertices:
        raise TransportError("boundary data must have one entry per vertex")
    _, _, out_w = incidence_matrices(sys.graph)
    amp = out_w.T @ d
    return GridFunction(edge_profiles(sys, mu, n_points) * amp[:, None], norm_p=1.0)


def transfer_matrix(sys: TransportSystem, mu: float) -> np.ndarray:
    """Boundary transfer ``Gamma D_mu = I_in diag(exp((q_j - mu)/v_j)) I_out_w.T``."""
    sys._check_mu(mu)
    _, inn, out_w = incidence_matrices(sys.graph)
    return inn @ (np.exp((sys.q - mu) / sys.v)[:, None] * out_w.T)


def transfer_simple(sys: TransportSystem, mu: float) -> np.ndarray:
    """``exp(-mu / v) A`` for a single velocity and no absorption."""
    if not sys.single_velocity or np.any(sys.q != 0):
        raise TransportError("transfer_simple needs one velocity and zero absorption")
    sys._check_mu(mu)
    return np.exp(-mu / sys.v[0]) * adjacency(sys.graph)


def transfer_compositional(sys: TransportSystem, mu: float, n_points: int = DEFAULT_POINTS) -> np.ndarray:
    """Evaluate ``Gamma D_mu`` column by column from lifted grid functions."""
    _, inn, _ = incidence_matrices(sys.graph)
    n = sys.graph.n_vertices
    cols = [inn @ dirichlet_apply(sys, mu, np.eye(n)[i], n_points).values[:, 0] for i in range(n)]
    return np.array(cols).T


def velocity_weights(v_grid) -> np.ndarray:
    v_grid = np.asarray(v_grid, dtype=float)
    if len(v_grid) == 1:
        return np.ones(1)
    dv = np.diff(v_grid)
    w = np.zeros(len(v_grid))
    w[:-1] += dv / 2
    w[1:] += dv / 2
    return w


def transfer_kinetic(graph: NetworkGraph, mu: float, g, v_grid, kernel,
                     absorption=None) -> np.ndarray:
    """Velocity-resolved transfer operator applied to vertex data ``g`` (N x Q).

    ``kernel[j, a, b]`` samples the scattering kernel on edge ``j`` at outgoing
    velocity ``v_grid[a]`` and incoming ``v_grid[b]``, evaluated at ``x = 0``.
    A one-point velocity grid is read as a point mass.
    """
    v_grid = np.asarray(v_grid, dtype=float)
    if v_grid.min() <= 0:
        raise TransportError("velocity grid must be strictly positive")
    g = np.atleast_2d(np.asarray(g, dtype=float))
    kernel = np.asarray(kernel, dtype=float)
    m, q_nodes = graph.n_edges, len(v_grid)
    if kernel.shape != (m, q_nodes, q_nodes):
        raise TransportError(f"kernel must have shape {(m, q_nodes, q_nodes)}")
    if kernel.min() < 0:
        raise TransportError("scattering kernel must be nonnegative")
    q = np.zeros(m) if absorption is None else np.asarray(absorption, dtype=float)
    _, inn, out_w = incidence_matrices(graph)
    edge_in = out_w.T @ g                                    # (M, Q) over v'
    damp = np.exp((q[:, None] - mu) / v_grid[None, :])       # (M, Q) over v'
    w = velocity_weights(v_grid)
    scattered = np.einsum("jab,jb->ja", kernel, edge_in * damp * w[None, :])
    return inn @ scattered


def resolvent_apply(sys: TransportSystem, mu: float, f: GridFunction) -> GridFunction:
    """Solve ``mu r - v r' - q r = f`` with ``r(1) = 0`` edge by edge.

    Uses ``r(x) = (1/v) int_x^1 exp((q - mu)(y - x)/v) f(y) dy`` accumulated from
    ``x = 1`` with the trapezoid rule on each cell.
    """
    sys._check_mu(mu)
    h = f.spacing
    out = np.zeros_like(f.values)
    for j in range(f.n_edges):
        a = (sys.q[j] - mu) / sys.v[j]
        e = np.exp(a * h)
        fj = f.values[j]
        r = out[j]
        for p in range(f.n_points - 2, -1, -1):
            r[p] = e * r[p + 1] + 0.5 * h * (fj[p] + e * fj[p + 1]) / sys.v[j]
    return GridFunction(out, f.norm_p)


def _shift_counts(sys: TransportSystem, dt: float, h: float) -> np.ndarray:
    s = sys.v * dt / h
    si = np.rint(s)
    if np.any(np.abs(s - si) > 1e-9 * np.maximum(1.0, s)) or np.any(si < 1):
        raise TransportError(
            f"time step {dt} is not an integer multiple of h/v_j on every edge (shifts {s})")
    return si.astype(int)


def default_step(sys: TransportSystem, h: float, max_denominator: int = 64) -> float:
    """Smallest step moving every edge by a whole, positive number of cells.

    Velocity ratios are matched to fractions with denominators up to
    ``max_denominator``; incommensurate velocities need an explicit ``dt``.
    """
    vmin = float(sys.v.min())
    lcm = 1
    for v in sys.v:
        frac = Fraction(float(v) / vmin).limit_denominator(max_denominator)
        if abs(float(frac) - v / vmin) > 1e-12 * v / vmin:
            raise TransportError("edge velocities are not commensurate; pass dt explicitly")
        lcm = math.lcm(lcm, frac.denominator)
    return h * lcm / vmin


def simulate_mild(sys: TransportSystem, f0: GridFunction, u: ControlSignal, t_final: float,
                  dt: float | None = None, positive: bool = True, save_every: int = 1) -> Trajectory:
    """Advance the closed-loop network along exact characteristics.

    ``dt`` must make ``v_j dt`` an integer number of grid cells on every edge;
    the default is ``default_step``. Inflow values between grid
    times are read off the current state by linear interpolation, which is exact
    when all velocities agree.
    """
    P, h = f0.n_points, f0.spacing
    if f0.n_edges != sys.graph.n_edges:
        raise TransportError("initial state has the wrong number of edges")
    if u.n_controls != sys.control.shape[1]:
        raise TransportError("control signal width does not match the control matrix")
    if positive:
        if f0.min() < 0:
            raise TransportError("negative initial state in positivity mode")
        if u.samples.min() < 0 or sys.control.min() < 0:
            raise TransportError("negative control in positivity mode")
    if dt is None:
        dt = default_step(sys, h)
    shifts = _shift_counts(sys, dt, h)
    if sys.v.max() * dt > 1.0 + 1e-12:
        raise TransportError("time step longer than the fastest transit time")

    _, inn, out_w = incidence_matrices(sys.graph)
    K = sys.control
    x = f0.x
    n_steps = int(np.ceil(t_final / dt - 1e-9))
    z = f0.values.copy()
    times, states = [0.0], [GridFunction(z.copy(), f0.norm_p)]
    for step in range(n_steps):
        t = step * dt
        new = np.empty_like(z)
        for j in range(sys.graph.n_edges):
            s = shifts[j]
            new[j, :P - s] = np.exp(sys.q[j] * dt) * z[j, s:]
            for k in range(s):
                # characteristic through node P-1-k left the vertex k cells ago
                lag = k * h / sys.v[j]
                tau = t + dt - lag
                outflow = np.array([np.exp(sys.q[i] * (tau - t))
                                    * np.interp(sys.v[i] * (tau - t), x, z[i])
                                    for i in range(sys.graph.n_edges)])
                vertex = inn @ outflow + K @ u(tau)
                new[j, P - 1 - k] = np.exp(sys.q[j] * lag) * out_w[:, j] @ vertex
        z = new
        if (step + 1) % save_every == 0 or step == n_steps - 1:
            times.append((step + 1) * dt)
            states.append(GridFunction(z.copy(), f0.norm_p))
    return Trajectory(np.array(times), states)


def rank_generators(sys: TransportSystem, powers: int | None = None) -> np.ndarray:
    """Rows ``I_out_w.T A^m K e_l`` for ``m < powers`` (default: number of edges)."""
    _, _, out_w = incidence_matrices(sys.graph)
    A = adjacency(sys.graph)
    powers = sys.graph.n_edges if powers is None else powers
    rows = []
    Am = np.eye(sys.graph.n_vertices)
    for _ in range(powers):
        rows.extend((out_w.T @ Am @ sys.control).T)
        Am = A @ Am
    return np.array(rows)


__all__ = [
    "TransportSystem", "TransportError", "default_step", "free_semigroup_apply", "dirichlet_apply",
    "edge_profiles", "transfer_matrix", "transfer_simple", "transfer_compositional",
    "transfer_kinetic", "velocity_weights", "resolvent_apply", "simulate_mild",
    "rank_generators", "is_strongly_connected",
]
