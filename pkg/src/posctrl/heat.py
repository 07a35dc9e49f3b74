"""Coupled heat equations on edges with Robin-type boundary coupling.

On edge ``j``: ``z_t = c_j z_xx - q_j z`` with ``z_x(t, 0) = 0`` and the flux
at ``x = 1`` set by ``z_x(t, 1) = (B z(t, 0) + K u(t))_j``.

The uncoupled Neumann problem is diagonal in ``cos(k pi x)`` with eigenvalues
``-q_j - c_j k^2 pi^2``; everything spectral here uses that basis truncated at
``k_max`` and trapezoid inner products on the uniform grid (exact for modes
``k < P - 1``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grid import ControlSignal, GridFunction, Trajectory, trapezoid_weights, uniform_grid

DEFAULT_KMAX = 64
DEFAULT_POINTS = 201
DEFAULT_DT = 0.01
TAIL_TOL = 1e-8


class HeatError(ValueError):
    pass


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class HeatNetwork:
    diffusivity: tuple
    absorption: tuple
    coupling: np.ndarray
    control: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.diffusivity, dtype=float))
        q = np.atleast_1d(np.asarray(self.absorption, dtype=float))
        m = len(c)
        q = np.broadcast_to(q, (m,)).copy()
        if np.any(c <= 0) or np.any(q <= 0):
            raise HeatError("diffusivity and absorption must be strictly positive")
        B = np.atleast_2d(np.asarray(self.coupling, dtype=float))
        K = np.atleast_2d(np.asarray(self.control, dtype=float))
        if B.shape != (m, m):
            raise HeatError(f"coupling must be {m} x {m}")
        if K.shape[0] != m:
            raise HeatError(f"control matrix needs {m} rows")
        object.__setattr__(self, "diffusivity", tuple(c))
        object.__setattr__(self, "absorption", tuple(q))
        object.__setattr__(self, "coupling", B)
        object.__setattr__(self, "control", K)

    @property
    def n_edges(self) -> int:
        return len(self.diffusivity)

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.diffusivity)

    @property
    def q(self) -> np.ndarray:
        return np.asarray(self.absorption)

    @property
    def spectral_bound(self) -> float:
        return float(-self.q.min())

    @property
    def positive(self) -> bool:
        return bool(self.coupling.min() >= 0 and self.control.min() >= 0)


def path_network(b: float = 1.0, c=1.0, q=1.0, control_vertex: int = 0) -> HeatNetwork:
    """Three heat edges in series, edge ``j`` feeding the flux of edge ``j + 1``."""
    B = np.zeros((3, 3))
    B[1, 0] = B[2, 1] = 1.0
    K = np.zeros((3, 1))
    K[control_vertex, 0] = b
    return HeatNetwork(tuple(np.broadcast_to(c, (3,))), tuple(np.broadcast_to(q, (3,))), B, K)


@dataclass
class SpectralBasis:
    k_max: int
    n_points: int
    eigenvalues: np.ndarray   # (M, k_max + 1)

    @classmethod
    def build(cls, net: HeatNetwork, k_max: int = DEFAULT_KMAX,
              n_points: int = DEFAULT_POINTS) -> "SpectralBasis":
        if k_max >= n_points - 1:
            raise HeatError("k_max must be below n_points - 1 for exact discrete orthogonality")
        k = np.arange(k_max + 1)
        lam = -net.q[:, None] - net.c[:, None] * (k * np.pi)[None, :] ** 2
        return cls(k_max, n_points, lam)

    @property
    def modes(self) -> np.ndarray:
        """``cos(k pi x_p)``, shape (k_max + 1, P)."""
        x = uniform_grid(self.n_points)
        return np.cos(np.pi * np.arange(self.k_max + 1)[:, None] * x[None, :])

    @property
    def mode_norms(self) -> np.ndarray:
        n = np.full(self.k_max + 1, 0.5)
        n[0] = 1.0
        return n

    def coefficients(self, values: np.ndarray) -> np.ndarray:
        """Expansion coefficients of grid values (M, P) -> (M, k_max + 1)."""
        w = trapezoid_weights(self.n_points)
        return (values * w) @ self.modes.T / self.mode_norms

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs @ self.modes


def heat_semigroup_apply(net: HeatNetwork, basis: SpectralBasis, h: GridFunction, t: float,
                         return_tail: bool = False):
    """Truncated-series Neumann semigroup; optionally also a bound on the dropped modes."""
    if t < 0:
        raise HeatError("t must be nonnegative")
    a = basis.coefficients(h.values)
    out = GridFunction(basis.synthesize(a * np.exp(basis.eigenvalues * t)), h.norm_p)
    if not return_tail:
        return out
    return out, semigroup_tail(net, basis, h, t)


def semigroup_tail(net: HeatNetwork, basis: SpectralBasis, h: GridFunction, t: float) -> float:
    """Bound on the L2 norm the truncation drops at time ``t``."""
    resid = h.values - basis.synthesize(basis.coefficients(h.values))
    w = trapezoid_weights(h.n_points)
    k1 = basis.k_max + 1
    decay = np.exp(-(net.q + net.c * (k1 * np.pi) ** 2) * t)
    per_edge = np.sqrt((resid ** 2) @ w)
    return float(np.sqrt(((decay * per_edge) ** 2).sum()))


def _rate(net: HeatNetwork, mu: float, j: int) -> float:
    arg = (mu + net.q[j]) / net.c[j]
    if arg <= 0:
        raise HeatError(f"mu={mu} not above -q_{j}={-net.q[j]}")
    return float(np.sqrt(arg))


def xi_kernel(net: HeatNetwork, mu: float, j: int, x) -> np.ndarray:
    """``cosh(s x) / (s sinh s)`` with ``s = sqrt((mu + q_j) / c_j)``.

    Written with decaying exponentials so large ``s`` does not overflow.
    """
    s = _rate(net, mu, j)
    x = np.asarray(x, dtype=float)
    num = np.exp(s * (x - 1.0)) + np.exp(-s * (x + 1.0))
    return num / (s * -np.expm1(-2.0 * s))


def xi_profiles(net: HeatNetwork, mu: float, n_points: int = DEFAULT_POINTS) -> np.ndarray:
    x = uniform_grid(n_points)
    return np.array([xi_kernel(net, mu, j, x) for j in range(net.n_edges)])


def heat_dirichlet_apply(net: HeatNetwork, mu: float, d, n_points: int = DEFAULT_POINTS) -> GridFunction:
    d = np.asarray(d, dtype=float).ravel()
    return GridFunction(xi_profiles(net, mu, n_points) * d[:, None])


def heat_transfer(net: HeatNetwork, mu: float) -> np.ndarray:
    xi0 = np.array([xi_kernel(net, mu, j, 0.0) for j in range(net.n_edges)])
    return net.coupling * xi0[None, :]


def xi_cosine_coefficient(net: HeatNetwork, mu: float, j: int, k: int) -> float:
    """Closed form of ``int_0^1 xi_j(x) cos(k pi x) dx``."""
    s = _rate(net, mu, j)
    return (-1.0) ** k / (s * s + (k * np.pi) ** 2)


def xi_cosine_quadrature(net: HeatNetwork, mu: float, j: int, k: int, nodes: int = 256) -> float:
    """Gauss-Legendre evaluation of the same integral (independent of the closed form)."""
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    x = 0.5 * (xg + 1.0)
    return float(0.5 * wg @ (xi_kernel(net, mu, j, x) * np.cos(k * np.pi * x)))


def is_path(net: HeatNetwork) -> bool:
    B = net.coupling
    expected = np.zeros((3, 3))
    expected[1, 0] = expected[2, 1] = 1.0
    return net.n_edges == 3 and np.array_equal(B != 0, expected != 0)


def path_H_operator(net: HeatNetwork, mu: float, u: float,
                    n_points: int = DEFAULT_POINTS) -> GridFunction:
    """``(xi_1 b u, xi_2 xi_1(0) b u, xi_3 xi_2(0) xi_1(0) b u)`` on the grid."""
    if not is_path(net):
        raise HeatError("H operator is defined for the three-edge path coupling")
    K = net.control
    rest = K.copy()
    rest[0, 0] = 0.0
    if np.any(rest != 0):
        raise HeatError("H operator expects a single control entry at K[0, 0]")
    b = K[0, 0]
    prof = xi_profiles(net, mu, n_points)
    xi0 = prof[:, 0]
    amp = b * u * np.array([1.0, xi0[0], xi0[0] * xi0[1]])
    return GridFunction(prof * amp[:, None])


def stationary_state(net: HeatNetwork, u, n_points: int = DEFAULT_POINTS) -> GridFunction:
    """Steady state for constant control: ``D_0 (I - A(0))^{-1} K u``."""
    A0 = heat_transfer(net, 0.0)
    g = np.linalg.solve(np.eye(net.n_edges) - A0, net.control @ np.atleast_1d(u))
    return heat_dirichlet_apply(net, 0.0, g, n_points)


def heat_simulate_mild(net: HeatNetwork, basis: SpectralBasis, h0: GridFunction, u: ControlSignal,
                       t_final: float, dt: float = DEFAULT_DT, positive: bool = True,
                       save_every: int = 1, tail_tol: float = TAIL_TOL) -> Trajectory:
    """Lifted exponential stepping of the mild solution.

    With the boundary flux ``g`` frozen over a step,
    ``z(t + dt) = T(dt) z(t) + (I - T(dt)) D_0 g``, where ``D_0`` is the
    ``mu = 0`` lifting. Both terms are positive operators applied to positive
    data, and steady states are exactly the lifted profiles ``D_0 g``.
    """
    if dt <= 0:
        raise HeatError("dt must be positive")
    if h0.n_edges != net.n_edges or h0.n_points != basis.n_points:
        raise HeatError("initial state does not match the network/basis grid")
    if positive:
        if not net.positive:
            raise HeatError("positivity mode needs nonnegative coupling and control matrices")
        if h0.min() < 0 or u.samples.min() < 0:
            raise HeatError("negative initial state or control in positivity mode")

    decay = np.exp(basis.eigenvalues * dt)
    lift = xi_profiles(net, 0.0, basis.n_points)
    lift_evolved = basis.synthesize(basis.coefficients(lift) * decay)
    k1 = basis.k_max + 1
    tail_factor = float(np.exp(-(net.q + net.c * (k1 * np.pi) ** 2) * dt).max())

    n_steps = int(np.ceil(t_final / dt - 1e-9))
    z = h0.values.copy()
    times, states = [0.0], [GridFunction(z.copy(), h0.norm_p)]
    warned = False
    w = trapezoid_weights(basis.n_points)
    for step in range(n_steps):
        t = step * dt
        a = basis.coefficients(z)
        resid = z - basis.synthesize(a)
        tail = tail_factor * float(np.sqrt(((resid ** 2) @ w).sum()))
        if not warned and tail > tail_tol * max(1.0, float(np.abs(z).max())):
            warnings.warn(f"truncation tail {tail:.2e} exceeds {tail_tol:.0e}; "
                          "raise k_max or the time step", TruncationWarning, stacklevel=2)
            warned = True
        g = net.coupling @ z[:, 0] + net.control @ u(t + 0.5 * dt)
        z = basis.synthesize(a * decay) + (lift - lift_evolved) * g[:, None]
        if (step + 1) % save_every == 0 or step == n_steps - 1:
            times.append((step + 1) * dt)
            states.append(GridFunction(z.copy(), h0.norm_p))
    return Trajectory(np.array(times), states)
