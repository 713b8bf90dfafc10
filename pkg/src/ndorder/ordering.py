"""Nested dissection driver and the distributed ordering tree.

Orderings are built as trees of inverse-permutation fragments. Each
dissection step numbers the separator vertices at the top of its index
interval (ascending original index) and recurses on the two parts; once a
subgraph sits on a single rank it is dissected sequentially, and below the
cutoff size it is ordered by quotient-graph minimum degree. Assembling all
fragments by ascending start index yields the inverse permutation.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .distgraph import (
    DistGraph,
    block_owners,
    build,
    centralize,
    fold,
    induced_subgraph,
    singleton_fragment,
)
from .errors import InvariantError
from .graph import Graph
from .params import OrderParams
from .procsim import Comm, run_group
from .separate import separate_graph

__all__ = [
    "SeqLeaf",
    "SepLeaf",
    "NodeRec",
    "OrderTree",
    "OrderResult",
    "min_degree_order",
    "nested_dissection",
    "assemble",
    "invert",
    "order_graph",
]


@dataclass
class SeqLeaf:
    start: int
    vertices: list            # original ids, elimination order


@dataclass
class SepLeaf:
    start: int
    vertices: list            # original ids, ascending


@dataclass
class NodeRec:
    start: int
    size: int
    n0: int
    n1: int
    nsep: int


@dataclass
class _Collector:
    leaves: list = field(default_factory=list)
    nodes: list = field(default_factory=list)


def min_degree_order(g: Graph):
    """Quotient-graph minimum degree with exact external degrees.

    Eliminated vertices become elements; a variable's degree is the size
    of its reachable set through adjacent variables and element
    boundaries. Ties go to the lowest index. Returns vertex positions of
    ``g`` in elimination order.
    """
    n = g.n
    adj_var = [set(row) for row in g.adj]
    adj_el = [set() for _ in range(n)]
    boundary = {}
    alive = [True] * n
    degree = [len(r) for r in adj_var]
    heap = [(degree[v], v) for v in range(n)]
    heapq.heapify(heap)
    order = []
    while heap:
        d, v = heapq.heappop(heap)
        if not alive[v] or d != degree[v]:
            continue
        alive[v] = False
        order.append(v)
        absorbed = list(adj_el[v])
        reach = {u for u in adj_var[v] if alive[u]}
        for e in absorbed:
            reach |= boundary[e]
        reach.discard(v)
        for e in absorbed:
            for u in boundary[e]:
                adj_el[u].discard(e)
            del boundary[e]
        boundary[v] = reach
        for u in reach:
            adj_var[u].discard(v)
            adj_var[u] -= reach
            adj_el[u].add(v)
            du = set(x for x in adj_var[u] if alive[x])
            for e in adj_el[u]:
                du |= boundary[e]
            du.discard(u)
            degree[u] = len(du)
            heapq.heappush(heap, (degree[u], u))
    return order


def _md_leaf(g: Graph, start, out):
    order = min_degree_order(g)
    out.leaves.append(SeqLeaf(start, [g.labels[v] for v in order]))


def _nd_sequential(g: Graph, comm: Comm, start, out, params: OrderParams):
    if g.n == 0:
        return
    if g.n <= params.nd_cutoff:
        _md_leaf(g, start, out)
        return
    part = separate_graph(singleton_fragment(g), comm, params)
    labels = part.labels
    n0 = labels.count(0)
    n1 = labels.count(1)
    ns = labels.count(2)
    if n0 == g.n or n1 == g.n:
        # the partition failed to split anything; fall back to min degree
        _md_leaf(g, start, out)
        return
    out.nodes.append(NodeRec(start, g.n, n0, n1, ns))
    if ns:
        sep = sorted(g.labels[v] for v in range(g.n) if labels[v] == 2)
        out.leaves.append(SepLeaf(start + n0 + n1, sep))
    g0, _ = g.induced([lab == 0 for lab in labels])
    g1, _ = g.induced([lab == 1 for lab in labels])
    _nd_sequential(g0, comm, start, out, params)
    _nd_sequential(g1, comm, start + n0, out, params)


def nested_dissection(frag: DistGraph, comm: Comm, start, out,
                      params: OrderParams):
    """Collective: one nested dissection recursion on a distributed graph.

    Separator via the multilevel pipeline; the two part subgraphs are
    folded onto the two halves of the group, which recurse independently.
    Leaves and internal interval records accumulate in ``out`` (separator
    leaves and node records on rank 0 of each group).
    """
    n = frag.nglobal
    if n == 0:
        return
    if comm.size == 1:
        _nd_sequential(frag.to_local_graph(), comm, start, out, params)
        return
    if n <= params.nd_cutoff:
        g = centralize(frag, comm, root=0)
        if comm.rank == 0:
            _nd_sequential(g, comm.solo(), start, out, params)
        return

    part = separate_graph(frag, comm, params)
    labels = part.labels
    counts = comm.allgather(
        (labels.count(0), labels.count(1), labels.count(2)), tag="nd-counts")
    n0 = sum(c[0] for c in counts)
    n1 = sum(c[1] for c in counts)
    ns = sum(c[2] for c in counts)

    if n0 == n or n1 == n:
        g = centralize(frag, comm, root=0)
        if comm.rank == 0:
            _md_leaf(g, start, out)
        return

    sep_local = sorted(frag.vlbl[i] for i in range(frag.nlocal)
                       if labels[i] == 2)
    gathered = comm.gather(sep_local, root=0, tag="nd-sep")
    if comm.rank == 0:
        out.nodes.append(NodeRec(start, n, n0, n1, ns))
        if ns:
            merged = sorted(x for chunk in gathered for x in chunk)
            out.leaves.append(SepLeaf(start + n0 + n1, merged))

    g0, _ = induced_subgraph(frag, comm, [lab == 0 for lab in labels])
    g1, _ = induced_subgraph(frag, comm, [lab == 1 for lab in labels])
    f0, _ = fold(g0, comm, side=0)
    f1, _ = fold(g1, comm, side=1)
    sub = comm.split()
    mine = f0 if sub.side == 0 else f1
    mine.register_halo(sub)
    nested_dissection(mine, sub, start if sub.side == 0 else start + n0,
                      out, params)


# -- ordering tree -------------------------------------------------------------


@dataclass
class TreeNode:
    start: int
    size: int
    kind: str                  # "internal" | "seq" | "sep"
    part0: "TreeNode | None" = None
    part1: "TreeNode | None" = None
    sep: "TreeNode | None" = None
    vertices: list | None = None

    def walk_leaves(self):
        if self.kind != "internal":
            yield self
            return
        for child in (self.part0, self.part1, self.sep):
            if child is not None:
                yield from child.walk_leaves()


class OrderTree:
    """Interval tree of ordering fragments rebuilt from per-rank records."""

    def __init__(self, n, leaves, nodes):
        self.n = n
        self._leaves = {(leaf.start, len(leaf.vertices)): leaf for leaf in leaves}
        self._nodes = {(rec.start, rec.size): rec for rec in nodes}
        self.root = self._build(0, n) if n else None
        used = sum(len(leaf.vertices) for leaf in leaves)
        if used != n:
            raise InvariantError(
                f"fragments hold {used} vertices, expected {n}")

    def _build(self, start, size):
        if size == 0:
            return None
        rec = self._nodes.get((start, size))
        if rec is not None:
            node = TreeNode(start, size, "internal")
            node.part0 = self._build(start, rec.n0)
            node.part1 = self._build(start + rec.n0, rec.n1)
            if rec.nsep:
                sep_leaf = self._leaves.get((start + rec.n0 + rec.n1, rec.nsep))
                if sep_leaf is None:
                    raise InvariantError(
                        f"missing separator fragment at {start + rec.n0 + rec.n1}")
                node.sep = TreeNode(sep_leaf.start, rec.nsep, "sep",
                                    vertices=sep_leaf.vertices)
            return node
        leaf = self._leaves.get((start, size))
        if leaf is None:
            raise InvariantError(f"interval [{start}, {start + size}) has no fragment")
        kind = "sep" if isinstance(leaf, SepLeaf) else "seq"
        return TreeNode(start, size, kind, vertices=leaf.vertices)

    def leaves(self):
        return [] if self.root is None else list(self.root.walk_leaves())


def assemble(tree: OrderTree):
    """Concatenate the leaf fragments by start index into the inverse
    permutation; any interval overlap or gap is a structural error."""
    inv = [-1] * tree.n
    for leaf in tree.leaves():
        for offset, vertex in enumerate(leaf.vertices):
            slot = leaf.start + offset
            if not 0 <= slot < tree.n or inv[slot] != -1:
                raise InvariantError(f"fragment overlap at slot {slot}")
            inv[slot] = vertex
    if any(v < 0 for v in inv):
        raise InvariantError("fragments leave a gap in the ordering")
    seen = set(inv)
    if len(seen) != tree.n or (tree.n and (min(seen) != 0 or max(seen) != tree.n - 1)):
        raise InvariantError("assembled ordering is not a bijection")
    return inv


def invert(perm):
    """Swap between a permutation and its inverse; involutive."""
    n = len(perm)
    out = [-1] * n
    for k, v in enumerate(perm):
        if not 0 <= v < n or out[v] != -1:
            raise InvariantError("input is not a bijection")
        out[v] = k
    return out


# -- driver ---------------------------------------------------------------------


@dataclass
class OrderResult:
    invperm: list             # slot k holds the vertex eliminated k-th
    tree: OrderTree

    @property
    def perm(self):
        """Direct permutation: vertex -> elimination position."""
        return invert(self.invperm)


def order_graph(graph: Graph, procs=1, seed=0, params=None,
                scheduler="threads") -> OrderResult:
    """Compute a fill-reducing ordering of a symmetric graph.

    The graph is block-distributed over ``procs`` logical processes and
    ordered by parallel-style nested dissection; the result is
    deterministic in (graph, procs, seed, params) for either scheduler.
    """
    params = params or OrderParams()
    if graph.n == 0:
        return OrderResult([], OrderTree(0, [], []))
    frags = build(graph.adj, block_owners(graph.n, procs), nparts=procs,
                  vwgt=graph.vwgt)

    def program(comm):
        out = _Collector()
        nested_dissection(frags[comm.rank], comm, 0, out, params)
        return out

    results = run_group(procs, program, seed=seed, scheduler=scheduler)
    leaves = [leaf for res in results for leaf in res.leaves]
    nodes = [rec for res in results for rec in res.nodes]
    tree = OrderTree(graph.n, leaves, nodes)
    return OrderResult(assemble(tree), tree)
