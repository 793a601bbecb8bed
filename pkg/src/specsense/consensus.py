"""Average consensus over the secondary-node communication graph.

Every "consensus loop" of the sensing algorithms goes through :func:`average`.
``ideal`` mode hands each node the exact network mean; ``iterative`` mode runs
synchronous Metropolis-weighted neighbour averaging until every node is within
tolerance of that mean (or the round cap is hit).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

IDEAL = "ideal"
ITERATIVE = "iterative"

# values of magnitude M cannot be averaged iteratively much below M * 1e-12
# in double precision; the stopping tolerance is floored there
RELATIVE_FLOOR = 1e-12


@dataclass
class ConsensusGraph:
    n: int
    edges: list[tuple[int, int]]
    weights: np.ndarray
    radius: float | None = None

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def second_eigenvalue_modulus(self) -> float:
        ev = np.sort(np.abs(np.linalg.eigvalsh(self.weights)))
        return float(ev[-2])


@dataclass(frozen=True)
class ConsensusConfig:
    mode: str = IDEAL
    tolerance: float = 1e-9
    max_rounds: int | None = None  # None -> 10 * n^2

    def __post_init__(self):
        if self.mode not in (IDEAL, ITERATIVE):
            raise ValueError(f"unknown consensus mode {self.mode!r}")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_rounds is not None and self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")

    def round_cap(self, n: int) -> int:
        return self.max_rounds if self.max_rounds is not None else 10 * n * n


def metropolis_weights(n: int, edges) -> np.ndarray:
    deg = np.zeros(n, dtype=int)
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    W = np.zeros((n, n))
    for i, j in edges:
        W[i, j] = W[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    W[np.diag_indices(n)] = 1.0 - W.sum(axis=1)
    return W


def graph_from_edges(n: int, edges, radius: float | None = None) -> ConsensusGraph:
    edges = sorted((min(i, j), max(i, j)) for i, j in edges)
    return ConsensusGraph(n, edges, metropolis_weights(n, edges), radius)


def is_connected(n: int, edges) -> bool:
    adj = np.zeros((n, n), dtype=bool)
    for i, j in edges:
        adj[i, j] = adj[j, i] = True
    return connected_components(adj, directed=False)[0] == 1


def build_graph(positions, radius: float) -> ConsensusGraph:
    """Random geometric graph with Metropolis weights.

    Nodes closer than ``radius`` are linked; while the graph is disconnected
    the radius is doubled.
    """
    pts = np.asarray(positions, dtype=float)
    n = len(pts)
    if n < 2:
        raise ValueError("need at least two nodes")
    if radius <= 0:
        raise ValueError("radius must be positive")
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    while True:
        ii, jj = np.nonzero(np.triu(d <= radius, k=1))
        edges = list(zip(ii.tolist(), jj.tolist()))
        if is_connected(n, edges):
            return graph_from_edges(n, edges, radius)
        radius *= 2.0


def average(graph: ConsensusGraph, values, config: ConsensusConfig = ConsensusConfig(),
            history: list | None = None) -> tuple[np.ndarray, int]:
    """Network average of per-node values.

    ``values`` has one row per node (a scalar per node is also accepted).
    Returns ``(per_node_values, rounds_used)``; ideal mode uses 0 rounds.
    If ``history`` is given, every intermediate state is appended to it.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim == 0 or v.shape[0] != graph.n:
        raise ValueError(f"expected one value per node ({graph.n}), got shape {v.shape}")
    if np.all(v == v[0]):
        return v.copy(), 0
    target = v.mean(axis=0)
    if config.mode == IDEAL:
        return np.broadcast_to(target, v.shape).copy(), 0

    tol = max(config.tolerance, RELATIVE_FLOOR * float(np.max(np.abs(v), initial=0.0)))
    cap = config.round_cap(graph.n)
    W = graph.weights
    if history is not None:
        history.append(v.copy())
    rounds = 0
    while rounds < cap and np.max(np.abs(v - target)) > tol:
        v = W @ v
        rounds += 1
        if history is not None:
            history.append(v.copy())
    return v, rounds
