"""Communication graphs: doubly stochastic weights and consensus metrics.

Agents exchange beliefs over a strongly connected digraph whose weighted
adjacency matrix is doubly stochastic, so that repeated averaging drives
all agents toward the network mean. Two constructions are provided:
Sinkhorn normalization of an arbitrary nonnegative matrix, and the closed
form Metropolis weights for undirected graphs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "WeightMatrix",
    "sinkhorn_normalize",
    "metropolis_weights",
    "is_strongly_connected",
    "consensus_error",
    "load_graph_json",
    "save_graph_json",
    "weight_matrix_from_graph",
]

_STOCHASTIC_TOL = 1e-9


@dataclass(frozen=True)
class WeightMatrix:
    """Nonnegative n x n weight matrix over the communication graph.

    When `normalized` is set, every row and column sum lies within 1e-9
    of 1 (checked on construction).
    """

    matrix: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"weight matrix must be square, got {m.shape}")
        if np.any(m < 0.0):
            raise ValueError("weight matrix entries must be nonnegative")
        object.__setattr__(self, "matrix", m)
        if self.normalized:
            rows = m.sum(axis=1)
            cols = m.sum(axis=0)
            worst = max(np.abs(rows - 1.0).max(), np.abs(cols - 1.0).max())
            if worst > _STOCHASTIC_TOL:
                raise ValueError(f"matrix flagged normalized but sums deviate by {worst:.3e}")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def row(self, i: int) -> np.ndarray:
        return self.matrix[i]

    def edges(self) -> list[tuple[int, int]]:
        """Off-diagonal support as (receiver, sender) pairs."""
        idx = np.argwhere(self.matrix > 0.0)
        return [(int(i), int(j)) for i, j in idx if i != j]


def sinkhorn_normalize(matrix, tol: float = 1e-10, max_iter: int = 10_000) -> WeightMatrix:
    """Rescale a nonnegative matrix to doubly stochastic form.

    Alternates row and column normalization until every row and column sum
    is within `tol` of 1. The zero pattern of the input is preserved, so
    the communication topology is unchanged.

    The input should be irreducible with strictly positive diagonal;
    violated support conditions show up as non-convergence.
    """
    m = np.asarray(matrix, dtype=float).copy()
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got {m.shape}")
    if np.any(m < 0.0):
        raise ValueError("matrix entries must be nonnegative")
    if np.any(m.sum(axis=1) == 0.0) or np.any(m.sum(axis=0) == 0.0):
        raise ValueError("matrix has an all-zero row or column")
    for _ in range(max_iter):
        m /= m.sum(axis=1, keepdims=True)
        m /= m.sum(axis=0, keepdims=True)
        rows = m.sum(axis=1)
        cols = m.sum(axis=0)
        if max(np.abs(rows - 1.0).max(), np.abs(cols - 1.0).max()) <= tol:
            return WeightMatrix(m, normalized=True)
    raise RuntimeError(
        f"Sinkhorn did not converge in {max_iter} iterations; "
        "check that the support is irreducible with positive diagonal"
    )


def metropolis_weights(edge_set, n: int) -> WeightMatrix:
    """Closed-form doubly stochastic weights for an undirected graph.

    For each undirected edge {i, j}: A_ij = 1 / (1 + max(deg_i, deg_j)).
    Diagonals absorb the remainder so each row sums to 1; symmetry then
    makes the column sums 1 as well.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    neighbors: list[set[int]] = [set() for _ in range(n)]
    for i, j in edge_set:
        i, j = int(i), int(j)
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) out of range for n={n}")
        if i == j:
            continue
        neighbors[i].add(j)
        neighbors[j].add(i)
    if n > 1 and not _undirected_connected(neighbors):
        raise ValueError("edge set does not form a connected graph")
    deg = [len(s) for s in neighbors]
    a = np.zeros((n, n))
    for i in range(n):
        for j in neighbors[i]:
            a[i, j] = 1.0 / (1.0 + max(deg[i], deg[j]))
        a[i, i] = 1.0 - a[i].sum()
    return WeightMatrix(a, normalized=True)


def _undirected_connected(neighbors: list[set[int]]) -> bool:
    n = len(neighbors)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in neighbors[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n


def is_strongly_connected(matrix) -> bool:
    """True iff every node reaches every other along positive entries.

    Accepts a raw array or a WeightMatrix. An edge A_ij > 0 means j sends
    to i, so forward reachability follows rows; the check runs one BFS on
    the support and one on its transpose.
    """
    m = matrix.matrix if isinstance(matrix, WeightMatrix) else np.asarray(matrix, dtype=float)
    n = m.shape[0]
    if n == 0:
        return False
    support = m > 0.0
    return _reaches_all(support, 0) and _reaches_all(support.T, 0)


def _reaches_all(adj: np.ndarray, start: int) -> bool:
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        u = stack.pop()
        for v in np.nonzero(adj[u])[0]:
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    return bool(seen.all())


def consensus_error(means) -> np.ndarray:
    """Per-agent total absolute deviation from the network-average mean.

    Returns a length-n vector whose i-th entry is
    sum_k |mean_i[k] - avg[k]| where avg is the elementwise average over
    agents. Zero everywhere iff all means are identical.
    """
    if len(means) == 0:
        raise ValueError("consensus_error requires at least one mean")
    stacked = np.stack([np.asarray(m, dtype=float).reshape(-1) for m in means])
    avg = stacked.mean(axis=0)
    return np.abs(stacked - avg).sum(axis=1)


def load_graph_json(path) -> dict:
    """Read a graph file: {"n": int, "edges": [[i, j], ...], "weights": optional}."""
    with open(path) as fh:
        payload = json.load(fh)
    if "n" not in payload:
        raise ValueError("graph file must contain 'n'")
    return payload


def save_graph_json(path, n: int, edges, weights=None) -> None:
    payload: dict = {"n": int(n), "edges": [[int(i), int(j)] for i, j in edges]}
    if weights is not None:
        payload["weights"] = np.asarray(weights, dtype=float).tolist()
    with open(path, "w") as fh:
        json.dump(payload, fh)


def weight_matrix_from_graph(payload: dict, tol: float = 1e-10, max_iter: int = 10_000) -> WeightMatrix:
    """Build normalized weights from a parsed graph file.

    Explicit weights are Sinkhorn-normalized; otherwise Metropolis weights
    are built from the edge list. A single node yields [[1.0]].
    """
    n = int(payload["n"])
    if "weights" in payload and payload["weights"] is not None:
        return sinkhorn_normalize(np.asarray(payload["weights"], dtype=float), tol=tol, max_iter=max_iter)
    if n == 1:
        return WeightMatrix(np.array([[1.0]]), normalized=True)
    return metropolis_weights(payload.get("edges", []), n)
