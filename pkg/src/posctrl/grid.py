"""Grid functions on a network of unit-length edges, and sampled control signals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def uniform_grid(n_points: int) -> np.ndarray:
    if n_points < 2:
        raise ValueError("need at least two grid points per edge")
    return np.linspace(0.0, 1.0, n_points)


def trapezoid_weights(n_points: int) -> np.ndarray:
    w = np.full(n_points, 1.0 / (n_points - 1))
    w[[0, -1]] *= 0.5
    return w


@dataclass
class GridFunction:
    """Edge-wise samples ``values[j, p]`` at ``x_p = p / (P - 1)``."""

    values: np.ndarray
    norm_p: float = 2.0

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function has non-finite entries")

    @classmethod
    def zeros(cls, n_edges: int, n_points: int, norm_p: float = 2.0) -> "GridFunction":
        return cls(np.zeros((n_edges, n_points)), norm_p)

    @classmethod
    def from_callable(cls, funcs, n_points: int, norm_p: float = 2.0) -> "GridFunction":
        x = uniform_grid(n_points)
        return cls(np.array([np.broadcast_to(f(x), x.shape) for f in funcs]), norm_p)

    @property
    def n_edges(self) -> int:
        return self.values.shape[0]

    @property
    def n_points(self) -> int:
        return self.values.shape[1]

    @property
    def x(self) -> np.ndarray:
        return uniform_grid(self.n_points)

    @property
    def spacing(self) -> float:
        return 1.0 / (self.n_points - 1)

    def norm(self, p: float | None = None) -> float:
        """Composite-trapezoid L^p norm over all edges."""
        p = self.norm_p if p is None else p
        w = trapezoid_weights(self.n_points)
        if np.isinf(p):
            return float(np.abs(self.values).max())
        return float((np.abs(self.values) ** p @ w).sum() ** (1.0 / p))

    def inner(self, other: "GridFunction") -> float:
        w = trapezoid_weights(self.n_points)
        return float(((self.values * other.values) @ w).sum())

    def min(self) -> float:
        return float(self.values.min())

    def copy(self) -> "GridFunction":
        return GridFunction(self.values.copy(), self.norm_p)


@dataclass
class ControlSignal:
    """Piecewise-constant control: ``samples[k]`` acts on ``(k dt, (k+1) dt]``."""

    dt: float
    samples: np.ndarray
    positive: bool = False

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim == 1:
            self.samples = self.samples[:, None]
        if self.dt <= 0:
            raise ValueError("control time step must be positive")
        if self.positive and self.samples.size and self.samples.min() < 0:
            raise ValueError("negative control sample in positivity mode")

    @classmethod
    def zero(cls, n_controls: int, dt: float = 1.0) -> "ControlSignal":
        return cls(dt, np.zeros((1, n_controls)), positive=True)

    @classmethod
    def constant(cls, value, dt: float = 1.0) -> "ControlSignal":
        return cls(dt, np.atleast_1d(np.asarray(value, dtype=float))[None, :],
                   positive=bool(np.min(value) >= 0))

    @property
    def n_controls(self) -> int:
        return self.samples.shape[1]

    def __call__(self, t: float) -> np.ndarray:
        """Value at time ``t``; the last sample is held beyond the end."""
        k = int(np.ceil(t / self.dt - 1e-9)) - 1
        k = min(max(k, 0), len(self.samples) - 1)
        return self.samples[k]


@dataclass
class Trajectory:
    times: np.ndarray
    states: list

    def rows(self):
        """Yield ``(t, edge, x, value)`` with 1-based edge numbers."""
        for t, z in zip(self.times, self.states):
            x = z.x
            for j in range(z.n_edges):
                for p in range(z.n_points):
                    yield float(t), j + 1, float(x[p]), float(z.values[j, p])

    @property
    def final(self) -> GridFunction:
        return self.states[-1]

    def min_value(self) -> float:
        return float(min(z.values.min() for z in self.states))

    def count_below(self, threshold: float) -> int:
        return int(sum((z.values < threshold).sum() for z in self.states))
