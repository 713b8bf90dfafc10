"""Ordering quality via symbolic Cholesky factorization.

Only the structure matters: n_c counts the nonzeros of factor column c,
diagonal included. NNZ is their sum, OPC the sum of their squares, and the
fill ratio divides NNZ by the nonzeros of the original matrix
(lower triangle plus diagonal). Two independent computations are provided:
a fast elimination-tree column count and a direct elimination-graph
simulation used as the reference oracle in the tests; they must agree
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvariantError
from .graph import Graph
from .ordering import invert

__all__ = [
    "ElimStats",
    "symbolic_factorize",
    "symbolic_factorize_reference",
    "fill_ratio",
]


@dataclass
class ElimStats:
    """Per-column factor counts for one ordering of one graph."""

    counts: list              # n_c by elimination position, diagonal included

    @property
    def nnz(self):
        return sum(self.counts)

    @property
    def opc(self):
        return sum(c * c for c in self.counts)


def _positions(graph: Graph, invperm):
    if len(invperm) != graph.n:
        raise InvariantError("permutation length does not match the graph")
    return invert(invperm)    # vertex -> elimination position


def symbolic_factorize(graph: Graph, invperm) -> ElimStats:
    """Column counts through the elimination tree (row subtree walks)."""
    n = graph.n
    pos = _positions(graph, invperm)
    # adjacency in elimination positions
    nbr = [[] for _ in range(n)]
    for u in range(n):
        pu = pos[u]
        for v in graph.adj[u]:
            nbr[pu].append(pos[v])

    parent = [-1] * n
    ancestor = [-1] * n
    for k in range(n):
        for j in nbr[k]:
            while j < k:
                nxt = ancestor[j]
                ancestor[j] = k
                if nxt == -1:
                    parent[j] = k
                    break
                j = nxt

    counts = [1] * n
    mark = [-1] * n
    for k in range(n):
        mark[k] = k
        for j in nbr[k]:
            while j < k and mark[j] != k:
                mark[j] = k
                counts[j] += 1
                j = parent[j]
    return ElimStats(counts)


def symbolic_factorize_reference(graph: Graph, invperm) -> ElimStats:
    """Elimination-graph simulation: clique the neighbors, count, repeat."""
    n = graph.n
    pos = _positions(graph, invperm)
    nbr = [set() for _ in range(n)]
    for u in range(n):
        for v in graph.adj[u]:
            nbr[pos[u]].add(pos[v])
    counts = []
    for k in range(n):
        later = {j for j in nbr[k] if j > k}
        counts.append(1 + len(later))
        for a in later:
            nbr[a] |= later
            nbr[a].discard(a)
    return ElimStats(counts)


def fill_ratio(stats: ElimStats, graph: Graph):
    """Factor nonzeros over matrix nonzeros, both counted as the lower
    triangle plus the diagonal."""
    return stats.nnz / (graph.nedges + graph.n)
