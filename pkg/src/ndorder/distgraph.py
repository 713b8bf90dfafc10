"""Distributed graphs: per-rank adjacency fragments with dual indexing.

Each rank of a group stores the adjacency of its own vertices only. Two
parallel edge arrays are kept: ``edge_loc`` holds global neighbor indices,
``edge_gst`` holds compact local-or-ghost indices. Ghost vertices (owned
elsewhere but adjacent to a local vertex) occupy slots
``[nlocal, nlocal + nghost)`` and are numbered by ascending owner rank then
ascending global index, so halo payloads can be assembled by in-order
traversal on the send side and received in place.

Ownership is tracked by a table of (start, end, rank) global-index
segments, duplicated on every rank; the owner of any vertex is found by
bisection. Freshly built or induced graphs give each rank one contiguous
segment; folding redistributes vertices without renumbering them, so a
folded graph's ranks may own several segments.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field

from .errors import GraphFormatError, InvariantError
from .graph import Graph
from .procsim import Comm, Message

__all__ = [
    "DistGraph",
    "FoldPlan",
    "block_owners",
    "build",
    "halo_exchange",
    "induced_subgraph",
    "fold",
    "centralize",
    "singleton_fragment",
]


class DistGraph:
    """One rank's fragment of a distributed graph."""

    def __init__(self, nglobal, narcs_global, segments, rank, vglb, vwgt, vlbl,
                 vert_loc, vend_loc, edge_loc, edge_wgt, base=0):
        self.nglobal = nglobal
        self.narcs_global = narcs_global
        self.base = base
        self.segments = segments          # (start, end, rank), sorted, duplicated
        self.rank = rank
        self.vglb = vglb                  # ascending globals of local vertices
        self.vwgt = vwgt
        self.vlbl = vlbl                  # original identity, carried through
        self.vert_loc = vert_loc
        self.vend_loc = vend_loc
        self.edge_loc = edge_loc
        self.edge_wgt = edge_wgt
        self._seg_starts = [s for s, _, _ in segments]
        self._local_slot = {g: i for i, g in enumerate(vglb)}
        # ghost tables, filled by _index_ghosts
        self.edge_gst = []
        self.ghost_glb = []
        self._ghost_slot = {}
        self._ghost_span = {}             # owner rank -> (lo, hi) ghost slots
        self.halo_send = {}               # dest rank -> local slots, ascending global

    # -- basic queries -----------------------------------------------------

    @property
    def nlocal(self):
        return len(self.vglb)

    @property
    def nghost(self):
        return len(self.ghost_glb)

    @property
    def nedges_global(self):
        return self.narcs_global // 2

    def owner_of(self, gidx):
        """Rank owning a global vertex index, by bisection on the segments."""
        if not 0 <= gidx < self.nglobal:
            raise InvariantError(f"global index {gidx} outside [0, {self.nglobal})")
        k = bisect_right(self._seg_starts, gidx) - 1
        s, e, r = self.segments[k]
        if not s <= gidx < e:
            raise InvariantError(f"global index {gidx} owned by no rank")
        return r

    def is_local(self, gidx):
        return gidx in self._local_slot

    def local_of(self, gidx):
        return self._local_slot[gidx]

    def arcs_of(self, i):
        """Edge-array index range of local vertex i."""
        return range(self.vert_loc[i], self.vend_loc[i])

    def storage_units(self):
        """Per-rank footprint proxy: locals + local arcs + ghosts."""
        return self.nlocal + len(self.edge_loc) + self.nghost

    def local_edges(self):
        """All arcs of this fragment as (gu, gv, weight)."""
        out = []
        for i in range(self.nlocal):
            gu = self.vglb[i]
            for k in self.arcs_of(i):
                out.append((gu, self.edge_loc[k], self.edge_wgt[k]))
        return out

    # -- ghost indexing ------------------------------------------------------

    def _index_ghosts(self):
        seen = set()
        for g in self.edge_loc:
            if g not in self._local_slot:
                seen.add(g)
        self.ghost_glb = sorted(seen, key=lambda g: (self.owner_of(g), g))
        self._ghost_slot = {g: self.nlocal + i for i, g in enumerate(self.ghost_glb)}
        self._ghost_span = {}
        for i, g in enumerate(self.ghost_glb):
            o = self.owner_of(g)
            lo, _ = self._ghost_span.get(o, (i, i))
            self._ghost_span[o] = (lo, i + 1)
        self.edge_gst = [
            self._local_slot.get(g) if g in self._local_slot else self._ghost_slot[g]
            for g in self.edge_loc
        ]

    def register_halo(self, comm: Comm):
        """Collective: tell each owner which of its vertices we ghost."""
        out = []
        for owner in sorted(self._ghost_span):
            lo, hi = self._ghost_span[owner]
            out.append(Message(comm.rank, owner, "halo-reg", self.ghost_glb[lo:hi]))
        incoming = comm.exchange(out)
        self.halo_send = {
            m.src: [self._local_slot[g] for g in m.payload] for m in incoming
        }
        return self

    # -- conversions ---------------------------------------------------------

    def to_local_graph(self):
        """Centralized view; valid only when this rank owns every vertex."""
        if self.nlocal != self.nglobal:
            raise InvariantError("fragment does not hold the whole graph")
        adj = []
        ewgt = []
        for i in range(self.nlocal):
            adj.append([self.edge_loc[k] for k in self.arcs_of(i)])
            ewgt.append([self.edge_wgt[k] for k in self.arcs_of(i)])
        return Graph(self.nglobal, adj, ewgt, vwgt=list(self.vwgt),
                     labels=list(self.vlbl))

    # -- validation ----------------------------------------------------------

    def check(self):
        if len(self.vert_loc) != self.nlocal or len(self.vend_loc) != self.nlocal:
            raise InvariantError("adjacency spans must cover exactly the local vertices")
        cover = 0
        prev_end = 0
        for s, e, _ in self.segments:
            if s < prev_end:
                raise InvariantError("ownership segments overlap")
            cover += e - s
            prev_end = e
        if cover != self.nglobal:
            raise InvariantError("ownership segments do not tile the vertex range")
        for i, g in enumerate(self.vglb):
            if i and g <= self.vglb[i - 1]:
                raise InvariantError("local globals not ascending")
            if self.owner_of(g) != self.rank:
                raise InvariantError(f"local vertex {g} not in my segments")
            if self.vert_loc[i] > self.vend_loc[i]:
                raise InvariantError(f"vertex {i}: start index after after-end index")
            if self.vwgt[i] < 1:
                raise InvariantError(f"vertex {g} has weight {self.vwgt[i]} < 1")
        for g in self.edge_loc:
            self.owner_of(g)   # raises if outside every range
        keys = [(self.owner_of(g), g) for g in self.ghost_glb]
        if keys != sorted(keys):
            raise InvariantError("ghosts not sorted by (owner rank, global index)")
        return self


@dataclass
class FoldPlan:
    """Deterministic redistribution plan for folding onto one half group."""

    side: int
    half: int
    recv: list                       # receiving parent ranks, ascending
    chunks: list                     # per receiver: [(gstart, gend, src parent rank)]
    new_segments: list = field(default_factory=list)   # in sub-rank space


def _leveled_targets(kept, extra):
    # raise bucket counts to a common waterline; lowest ranks take remainders
    if extra <= 0:
        return list(kept)
    lo, hi = min(kept), max(kept) + extra
    while lo < hi:
        mid = (lo + hi) // 2
        if sum(max(0, mid - c) for c in kept) >= extra:
            hi = mid
        else:
            lo = mid + 1
    level = lo
    out = [max(c, level - 1) for c in kept]
    rem = extra - sum(o - c for o, c in zip(out, kept))
    for i, c in enumerate(out):
        if rem == 0:
            break
        if c < level:
            out[i] += 1
            rem -= 1
    return out


def _fold_plan(segments, psize, side):
    half = (psize + 1) // 2
    recv = list(range(half)) if side == 0 else list(range(half, psize))
    recv_set = set(recv)
    counts = [0] * psize
    for s, e, r in segments:
        counts[r] += e - s
    kept = [counts[r] for r in recv]
    stream = sorted((s, e, r) for s, e, r in segments if r not in recv_set)
    extra = sum(e - s for s, e, _ in stream)
    targets = _leveled_targets(kept, extra)
    chunks = [[] for _ in recv]
    si, spos = 0, stream[0][0] if stream else 0
    for i in range(len(recv)):
        need = targets[i] - kept[i]
        while need > 0:
            s, e, src = stream[si]
            take = min(need, e - spos)
            chunks[i].append((spos, spos + take, src))
            spos += take
            need -= take
            if spos == e:
                si += 1
                spos = stream[si][0] if si < len(stream) else 0
    rank_base = 0 if side == 0 else half
    segs = [(s, e, r - rank_base) for s, e, r in segments if r in recv_set]
    for i, r in enumerate(recv):
        segs.extend((s, e, r - rank_base) for s, e, _ in chunks[i])
    segs.sort()
    merged = []
    for s, e, r in segs:
        if merged and merged[-1][1] == s and merged[-1][2] == r:
            merged[-1] = (merged[-1][0], e, r)
        else:
            merged.append((s, e, r))
    return FoldPlan(side, half, recv, chunks, merged)


def block_owners(n, nparts):
    """Contiguous blocks of ceil(n/nparts) vertices in index order."""
    size = -(-n // nparts) if n else 0
    return [min(g // size, nparts - 1) if size else 0 for g in range(n)]


def build(adj, owners, nparts=None, vwgt=None, base=0):
    """Distribute a global graph into per-rank fragments.

    ``adj`` holds base-relative neighbor lists; ``owners`` assigns each
    vertex to a rank (any covering assignment works, contiguous blocks give
    single-segment ownership). Validates symmetry and rejects self loops.
    Returns the list of fragments, one per rank, with halo tables filled.
    """
    n = len(adj)
    if nparts is None:
        nparts = max(owners, default=0) + 1
    if len(owners) != n:
        raise GraphFormatError("owner assignment must cover every vertex")
    norm = []
    arcs = set()
    for u, row in enumerate(adj):
        out = []
        for v in row:
            v0 = v - base
            if not 0 <= v0 < n:
                raise GraphFormatError(f"neighbor {v} of vertex {u + base} out of range")
            if v0 == u:
                raise GraphFormatError(f"self loop at vertex {u + base}")
            out.append(v0)
            arcs.add((u, v0))
        norm.append(out)
    for u, v in arcs:
        if (v, u) not in arcs:
            raise GraphFormatError(f"asymmetric input: arc ({u + base},{v + base}) "
                                   "has no reverse")
    if vwgt is None:
        vwgt = [1] * n
    for r in owners:
        if not 0 <= r < nparts:
            raise GraphFormatError(f"owner rank {r} out of range")

    segments = []
    for g in range(n):
        if segments and segments[-1][2] == owners[g] and segments[-1][1] == g:
            segments[-1] = (segments[-1][0], g + 1, owners[g])
        else:
            segments.append((g, g + 1, owners[g]))
    segments = [tuple(s) for s in segments]

    frags = []
    per_rank = [[] for _ in range(nparts)]
    for g in range(n):
        per_rank[owners[g]].append(g)
    narcs = sum(len(row) for row in norm)
    for r in range(nparts):
        mine = per_rank[r]
        vert, vend, eloc, ewgt_a = [], [], [], []
        for g in mine:
            vert.append(len(eloc))
            eloc.extend(norm[g])
            ewgt_a.extend([1] * len(norm[g]))
            vend.append(len(eloc))
        frag = DistGraph(n, narcs, segments, r, list(mine),
                         [vwgt[g] for g in mine], list(mine),
                         vert, vend, eloc, ewgt_a, base=base)
        frag._index_ghosts()
        frags.append(frag)
    # halo send lists, computed globally instead of by exchange
    for frag in frags:
        for owner in sorted(frag._ghost_span):
            lo, hi = frag._ghost_span[owner]
            frags[owner].halo_send[frag.rank] = [
                frags[owner]._local_slot[g] for g in frag.ghost_glb[lo:hi]
            ]
    return frags


def singleton_fragment(g: Graph):
    """Wrap a centralized graph as the fragment of a one-rank group."""
    vert, vend, eloc, ewgt = [], [], [], []
    for row, wrow in zip(g.adj, g.ewgt):
        vert.append(len(eloc))
        eloc.extend(row)
        ewgt.extend(wrow)
        vend.append(len(eloc))
    frag = DistGraph(g.n, g.narcs, [(0, g.n, 0)] if g.n else [], 0,
                     list(range(g.n)), list(g.vwgt), list(g.labels),
                     vert, vend, eloc, ewgt)
    frag._index_ghosts()
    return frag


def halo_exchange(frag: DistGraph, comm: Comm, values):
    """Collective: copy each owner's local values into every ghost slot.

    ``values`` must have one entry per local vertex (extra ghost entries
    are ignored). Returns a list of length nlocal + nghost whose ghost
    slots hold the owning rank's values.
    """
    if len(values) not in (frag.nlocal, frag.nlocal + frag.nghost):
        raise InvariantError(
            f"vertex data length {len(values)} does not match "
            f"{frag.nlocal} locals (+{frag.nghost} ghosts)"
        )
    out = []
    for dst in sorted(frag.halo_send):
        idx = frag.halo_send[dst]
        out.append(Message(comm.rank, dst, "halo", [values[i] for i in idx]))
    incoming = comm.exchange(out)
    result = list(values[:frag.nlocal]) + [None] * frag.nghost
    for m in incoming:
        lo, hi = frag._ghost_span[m.src]
        if len(m.payload) != hi - lo:
            raise InvariantError("halo payload does not match ghost span")
        result[frag.nlocal + lo:frag.nlocal + hi] = m.payload
    return result


def induced_subgraph(frag: DistGraph, comm: Comm, flags):
    """Collective: subgraph on flagged local vertices, renumbered globally.

    New global numbering is rank-major by ascending old global index, so
    each rank keeps its own flagged vertices and ownership stays one
    contiguous range per rank. Returns (fragment, old-global -> new-global
    map for this rank's flagged vertices).
    """
    nsel = sum(1 for f in flags if f)
    counts = comm.allgather(nsel, tag="ind-count")
    offset = sum(counts[:comm.rank])
    total = sum(counts)
    new_id = [-1] * frag.nlocal
    j = offset
    for i in range(frag.nlocal):
        if flags[i]:
            new_id[i] = j
            j += 1
    full = halo_exchange(frag, comm, new_id)

    vglb, vwgt, vlbl = [], [], []
    vert, vend, eloc, ewgt = [], [], [], []
    for i in range(frag.nlocal):
        if not flags[i]:
            continue
        vglb.append(new_id[i])
        vwgt.append(frag.vwgt[i])
        vlbl.append(frag.vlbl[i])
        vert.append(len(eloc))
        for k in frag.arcs_of(i):
            t = full[frag.edge_gst[k]]
            if t is not None and t >= 0:
                eloc.append(t)
                ewgt.append(frag.edge_wgt[k])
        vend.append(len(eloc))

    narcs = comm.allreduce_sum(len(eloc))
    cum = [0]
    for c in counts:
        cum.append(cum[-1] + c)
    segments = [(cum[r], cum[r + 1], r) for r in range(comm.size) if counts[r]]
    sub = DistGraph(total, narcs, segments, comm.rank, vglb, vwgt, vlbl,
                    vert, vend, eloc, ewgt, base=frag.base)
    sub._index_ghosts()
    sub.register_halo(comm)
    old_to_new = {frag.vglb[i]: new_id[i] for i in range(frag.nlocal) if flags[i]}
    return sub, old_to_new


def _pack_range(frag: DistGraph, gs, ge):
    lo = bisect_left(frag.vglb, gs)
    hi = bisect_left(frag.vglb, ge)
    deg, eloc, ewgt = [], [], []
    for i in range(lo, hi):
        deg.append(frag.vend_loc[i] - frag.vert_loc[i])
        eloc.extend(frag.edge_loc[k] for k in frag.arcs_of(i))
        ewgt.extend(frag.edge_wgt[k] for k in frag.arcs_of(i))
    return (gs, frag.vwgt[lo:hi], frag.vlbl[lo:hi], deg, eloc, ewgt)


def fold(frag: DistGraph, comm: Comm, side=0, duplicate=False):
    """Collective: redistribute the graph onto one half of the group.

    Vertices keep their global numbers; sender vertices are streamed in
    ascending global order onto the receivers until vertex counts level
    out. With ``duplicate`` both halves receive a complete copy (each with
    its own plan). Returns (fragment or None, plans); the fragment still
    needs ``register_halo`` on the half group produced by ``comm.split()``.
    """
    if comm.size < 2:
        raise InvariantError("cannot fold a group of size 1")
    sides = (0, 1) if duplicate else (side,)
    plans = [_fold_plan(frag.segments, comm.size, s) for s in sides]

    out = []
    for plan in plans:
        for i, r in enumerate(plan.recv):
            for gs, ge, src in plan.chunks[i]:
                if src == comm.rank:
                    out.append(Message(comm.rank, r, ("fold", plan.side),
                                       _pack_range(frag, gs, ge)))
    incoming = comm.exchange(out)

    mine = None
    for plan in plans:
        if comm.rank in plan.recv:
            mine = plan
    if mine is None:
        return None, plans

    pieces = []
    # kept vertices, one piece per owned segment so ranges stay contiguous
    for s, e, r in frag.segments:
        if r == frag.rank and e > s:
            pieces.append(_pack_range(frag, s, e))
    for m in incoming:
        if m.tag == ("fold", mine.side):
            pieces.append(m.payload)
    pieces.sort(key=lambda p: p[0])

    vglb, vwgt, vlbl = [], [], []
    vert, vend, eloc, ewgt = [], [], [], []
    for gs, w, lbl, deg, pe, pw in pieces:
        vglb.extend(range(gs, gs + len(w)))
        vwgt.extend(w)
        vlbl.extend(lbl)
        pos = 0
        for d in deg:
            vert.append(len(eloc))
            eloc.extend(pe[pos:pos + d])
            ewgt.extend(pw[pos:pos + d])
            vend.append(len(eloc))
            pos += d
    rank_base = 0 if mine.side == 0 else mine.half
    folded = DistGraph(frag.nglobal, frag.narcs_global, mine.new_segments,
                       comm.rank - rank_base, vglb, vwgt, vlbl,
                       vert, vend, eloc, ewgt, base=frag.base)
    folded._index_ghosts()
    return folded, plans


def centralize(frag: DistGraph, comm: Comm, root=None):
    """Collective: assemble the whole graph on every rank (or on ``root``).

    Returns the centralized Graph, or None on non-root ranks when a root
    is given.
    """
    rows = []
    for i in range(frag.nlocal):
        rows.append(([frag.edge_loc[k] for k in frag.arcs_of(i)],
                     [frag.edge_wgt[k] for k in frag.arcs_of(i)]))
    payload = (frag.vglb, frag.vwgt, frag.vlbl, rows)
    if root is None:
        data = comm.allgather(payload, tag="centralize")
    else:
        data = comm.gather(payload, root=root, tag="centralize")
        if data is None:
            return None
    n = frag.nglobal
    adj = [None] * n
    ewgt = [None] * n
    vwgt = [1] * n
    labels = [0] * n
    for vglb, w, lbl, rws in data:
        for g, wg, lb, (row, wrow) in zip(vglb, w, lbl, rws):
            adj[g] = row
            ewgt[g] = wrow
            vwgt[g] = wg
            labels[g] = lb
    if any(r is None for r in adj):
        raise InvariantError("centralize: fragments do not cover the vertex set")
    return Graph(n, adj, ewgt, vwgt=vwgt, labels=labels)
