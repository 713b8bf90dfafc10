"""Centralized undirected graphs as adjacency lists.

This is the representation handed to the sequential algorithms (initial
separators, FM refinement, minimum degree, symbolic factorization) and to
the file readers. Vertices are 0-based; every edge is stored as two arcs;
weights default to 1.
"""

from __future__ import annotations

from .errors import GraphFormatError

__all__ = ["Graph"]


class Graph:
    __slots__ = ("n", "adj", "ewgt", "vwgt", "labels")

    def __init__(self, n, adj, ewgt=None, vwgt=None, labels=None):
        self.n = n
        self.adj = adj
        self.ewgt = ewgt if ewgt is not None else [[1] * len(row) for row in adj]
        self.vwgt = vwgt if vwgt is not None else [1] * n
        # original identity of each vertex; subgraphs keep pointing at the
        # vertices of the graph they were cut from
        self.labels = labels if labels is not None else list(range(n))

    @classmethod
    def from_edges(cls, n, edges, vwgt=None):
        adj = [[] for _ in range(n)]
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
        return cls(n, adj, vwgt=vwgt)

    @property
    def narcs(self):
        return sum(len(row) for row in self.adj)

    @property
    def nedges(self):
        return self.narcs // 2

    def total_vwgt(self):
        return sum(self.vwgt)

    def degree(self, u):
        return len(self.adj[u])

    def edges(self):
        """Undirected edges as (u, v, weight) with u < v."""
        for u, row in enumerate(self.adj):
            for v, w in zip(row, self.ewgt[u]):
                if u < v:
                    yield u, v, w

    def check(self):
        """Validate symmetry, no self loops, positive weights."""
        arcs = set()
        for u, row in enumerate(self.adj):
            if self.vwgt[u] < 1:
                raise GraphFormatError(f"vertex {u} has weight {self.vwgt[u]} < 1")
            if len(set(row)) != len(row):
                raise GraphFormatError(f"vertex {u} has duplicate neighbors")
            for v in row:
                if v == u:
                    raise GraphFormatError(f"self loop at vertex {u}")
                if not 0 <= v < self.n:
                    raise GraphFormatError(f"neighbor {v} of {u} out of range")
                arcs.add((u, v))
        for u, v in arcs:
            if (v, u) not in arcs:
                raise GraphFormatError(f"arc ({u},{v}) has no reverse arc")
        return self

    def induced(self, keep):
        """Subgraph on the flagged vertices, relabeled contiguously.

        ``keep`` is a per-vertex boolean sequence. Returns the subgraph,
        whose ``labels`` carry the original identities through.
        """
        new_id = [-1] * self.n
        order = [u for u in range(self.n) if keep[u]]
        for i, u in enumerate(order):
            new_id[u] = i
        adj = []
        ewgt = []
        for u in order:
            row, wrow = [], []
            for v, w in zip(self.adj[u], self.ewgt[u]):
                if new_id[v] >= 0:
                    row.append(new_id[v])
                    wrow.append(w)
            adj.append(row)
            ewgt.append(wrow)
        sub = Graph(len(order), adj, ewgt,
                    vwgt=[self.vwgt[u] for u in order],
                    labels=[self.labels[u] for u in order])
        return sub, order

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.nedges})"
