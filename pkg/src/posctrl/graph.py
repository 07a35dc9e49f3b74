"""Directed weighted network graphs and their incidence/adjacency matrices.

Vertices and edges are 0-based here; scenario files use 1-based indices and
are converted on load.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

KIRCHHOFF_TOL = 1e-12


class GraphError(ValueError):
    pass


def as_positive_matrix(a, name: str = "matrix", tol: float = 0.0) -> np.ndarray:
    """Return ``a`` as a 2-D float array, raising if any entry is below ``-tol``."""
    arr = np.atleast_2d(np.asarray(a, dtype=float))
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    if arr.size and arr.min() < -tol:
        raise ValueError(f"{name} has negative entries (min {arr.min():.3g})")
    return arr


@dataclass(frozen=True)
class Edge:
    tail: int
    head: int
    weight: float = 1.0


@dataclass(frozen=True)
class NetworkGraph:
    n_vertices: int
    edges: tuple[Edge, ...]
    kirchhoff: bool = True

    def __post_init__(self):
        edges = tuple(e if isinstance(e, Edge) else Edge(*e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        if self.n_vertices < 1:
            raise GraphError("n_vertices must be positive")
        if not edges:
            raise GraphError("graph needs at least one edge")
        for j, e in enumerate(edges):
            for end in (e.tail, e.head):
                if not 0 <= end < self.n_vertices:
                    raise GraphError(f"edge {j}: vertex {end} out of range")
            if not 0.0 <= e.weight <= 1.0:
                raise GraphError(f"edge {j}: weight {e.weight} outside [0, 1]")
        if self.kirchhoff:
            sums = np.zeros(self.n_vertices)
            for e in edges:
                sums[e.tail] += e.weight
            counts = np.bincount([e.tail for e in edges], minlength=self.n_vertices)
            for i in range(self.n_vertices):
                if counts[i] == 0:
                    raise GraphError(f"vertex {i} has no outgoing edge")
                if abs(sums[i] - 1.0) > KIRCHHOFF_TOL:
                    raise GraphError(
                        f"vertex {i}: outgoing weights sum to {sums[i]!r}, expected 1")

    @classmethod
    def from_edges(cls, n_vertices: int, edges: Iterable[Sequence], kirchhoff: bool = True):
        return cls(n_vertices, tuple(Edge(int(e[0]), int(e[1]), float(e[2]) if len(e) > 2 else 1.0)
                                     for e in edges), kirchhoff)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def tails(self) -> np.ndarray:
        return np.array([e.tail for e in self.edges])

    @property
    def heads(self) -> np.ndarray:
        return np.array([e.head for e in self.edges])

    @property
    def weights(self) -> np.ndarray:
        return np.array([e.weight for e in self.edges], dtype=float)


def cycle_graph(n: int) -> NetworkGraph:
    """Directed cycle v0 -> v1 -> ... -> v(n-1) -> v0; edge j leaves vertex j."""
    return NetworkGraph.from_edges(n, [(j, (j + 1) % n, 1.0) for j in range(n)])


def path_graph(n: int) -> NetworkGraph:
    return NetworkGraph.from_edges(n, [(j, j + 1, 1.0) for j in range(n - 1)], kirchhoff=False)


def incidence_matrices(g: NetworkGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Outgoing, incoming and weighted outgoing incidence matrices, each N x M."""
    n, m = g.n_vertices, g.n_edges
    out = np.zeros((n, m))
    inn = np.zeros((n, m))
    cols = np.arange(m)
    out[g.tails, cols] = 1.0
    inn[g.heads, cols] = 1.0
    out_w = out * g.weights[None, :]
    return out, inn, out_w


def adjacency(g: NetworkGraph) -> np.ndarray:
    """Weighted transposed adjacency ``I_in @ I_out_w.T``.

    Entry (i, k) is the weight of the edge running from vertex k into vertex i
    (summed over parallel edges). Column stochastic under the Kirchhoff condition.
    """
    _, inn, out_w = incidence_matrices(g)
    return inn @ out_w.T


def _reachable(adj: list[list[int]], start: int) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def is_strongly_connected(g: NetworkGraph) -> bool:
    fwd: list[list[int]] = [[] for _ in range(g.n_vertices)]
    bwd: list[list[int]] = [[] for _ in range(g.n_vertices)]
    for e in g.edges:
        fwd[e.tail].append(e.head)
        bwd[e.head].append(e.tail)
    return (len(_reachable(fwd, 0)) == g.n_vertices
            and len(_reachable(bwd, 0)) == g.n_vertices)
