"""Shortest-path indicator matrices and mean-over-distance propagation.

For a graph with n nodes and a cutoff r, the engine builds one binary
n x n matrix per distance j in 0..r whose (i, k) entry is 1 exactly when
the shortest-path distance between i and k is j.  Distance 0 is the
identity, distance 1 the adjacency matrix, and the supports of the
matrices are pairwise disjoint.  Propagation at distance j replaces each
node's row by the mean over its distance-j neighbors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .data import Graph


@dataclass(frozen=True)
class SPTensor:
    """Per-distance indicator matrices for one graph, plus row normalizers.

    ``mats[j]`` is the sparse binary matrix of pairs at distance exactly j;
    ``inv_degrees[j][i]`` is 1 / (row sum of mats[j] row i), or 0 when node
    i has no distance-j neighbor.  Immutable after construction.
    """

    r: int
    mats: tuple[sparse.csr_matrix, ...]
    inv_degrees: tuple[np.ndarray, ...]

    @property
    def node_count(self) -> int:
        return self.mats[0].shape[0]


def compute_sp_tensor(graph: Graph, r: int) -> SPTensor:
    """Build the distance matrices SP^0..SP^r with one depth-limited
    breadth-first visit per node.

    Pairs at distance greater than r (including disconnected pairs) appear
    in no matrix.  Worst case O(n * (n + m)) per graph; the depth bound
    only ever shrinks the visits.
    """
    if r < 0:
        raise ValueError(f"distance cutoff must be non-negative, got {r}")
    n = graph.node_count
    nbrs = graph.neighbors
    rows: list[list[int]] = [[] for _ in range(r + 1)]
    cols: list[list[int]] = [[] for _ in range(r + 1)]

    dist = np.empty(n, dtype=np.int64)
    for src in range(n):
        dist[:] = -1
        dist[src] = 0
        rows[0].append(src)
        cols[0].append(src)
        frontier = [src]
        for depth in range(1, r + 1):
            nxt = []
            for u in frontier:
                for w in nbrs[u]:
                    if dist[w] < 0:
                        dist[w] = depth
                        nxt.append(w)
                        rows[depth].append(src)
                        cols[depth].append(w)
            if not nxt:
                break
            frontier = nxt

    mats = []
    inv_degrees = []
    for j in range(r + 1):
        m = sparse.csr_matrix(
            (np.ones(len(rows[j])), (rows[j], cols[j])), shape=(n, n)
        )
        counts = np.asarray(m.sum(axis=1)).ravel()
        inv = np.zeros(n)
        nz = counts > 0
        inv[nz] = 1.0 / counts[nz]
        mats.append(m)
        inv_degrees.append(inv)
    return SPTensor(r=r, mats=tuple(mats), inv_degrees=tuple(inv_degrees))


def propagate(sp: SPTensor, j: int, h: np.ndarray) -> np.ndarray:
    """Mean of the rows of ``h`` over the nodes at distance exactly j.

    Rows with no distance-j neighbor come out all-zero.  Linear in ``h``.
    """
    if not 0 <= j <= sp.r:
        raise ValueError(f"distance {j} outside 0..{sp.r}")
    if h.shape[0] != sp.node_count:
        raise ValueError(f"h has {h.shape[0]} rows, graph has {sp.node_count} nodes")
    if j == 0:  # distance 0 is the identity
        return h.copy()
    return sp.inv_degrees[j][:, None] * (sp.mats[j] @ h)


def propagate_transpose(sp: SPTensor, j: int, h: np.ndarray) -> np.ndarray:
    """Apply the transpose of the distance-j propagation operator.

    The operator is D^-1 S with S symmetric, so its transpose is S D^-1;
    this is what backpropagation through :func:`propagate` needs.
    """
    if not 0 <= j <= sp.r:
        raise ValueError(f"distance {j} outside 0..{sp.r}")
    if j == 0:
        return h.copy()
    return sp.mats[j] @ (sp.inv_degrees[j][:, None] * h)
