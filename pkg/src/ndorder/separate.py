"""Vertex separators on the multilevel hierarchy.

A partition labels every vertex 0, 1 or 2 (separator); no edge may join a
0-vertex to a 1-vertex. Candidate partitions are compared by the
lexicographic cost (balance infeasible?, separator weight, imbalance
excess over the tolerance), so balanced separators always beat smaller but
lopsided ones and ties resolve deterministically.

Refinement moves a separator vertex into one part, pulling its neighbors
of the other part into the separator; bounded hill-climbing with rollback
keeps the best state visited. During uncoarsening the refinement runs on a
band of vertices within a few hops of the projected separator, closed off
by two weighted anchor vertices; centralized copies of the band are
refined independently on every rank from perturbed starts and the best
result is projected back.
"""

from __future__ import annotations

from dataclasses import dataclass

from .coarsen import CoarsenStep, FoldStep, coarsen_to_bottom
from .distgraph import DistGraph, halo_exchange
from .errors import InvariantError
from .graph import Graph
from .params import OrderParams
from .procsim import Comm, Message

__all__ = [
    "Partition",
    "BandGraph",
    "cost_key",
    "part_weights",
    "fm_refine",
    "initial_separator",
    "band_extract",
    "band_refine_multiseq",
    "uncoarsen",
    "separate_graph",
    "check_separator",
    "check_separator_dist",
]


@dataclass
class Partition:
    """Per-vertex part labels plus the global part weights."""

    labels: list
    w0: int = 0
    w1: int = 0
    wsep: int = 0

    @property
    def total(self):
        return self.w0 + self.w1 + self.wsep

    @property
    def imbalance(self):
        return abs(self.w0 - self.w1) / self.total if self.total else 0.0

    def key(self, tol):
        return cost_key((self.w0, self.w1, self.wsep), tol)


def cost_key(weights, tol):
    """Comparison key: feasibility, separator weight, imbalance excess.

    Plain imbalance breaks the remaining ties so that within-tolerance
    candidates still prefer the more even split.
    """
    w0, w1, ws = weights
    total = w0 + w1 + ws
    imb = abs(w0 - w1) / total if total else 0.0
    excess = imb - tol if imb > tol else 0.0
    return (1 if excess > 0 else 0, ws, excess, imb)


def part_weights(labels, vwgt):
    w = [0, 0, 0]
    for v, lab in enumerate(labels):
        w[lab] += vwgt[v]
    return tuple(w)


def check_separator(g: Graph, labels):
    """Edge scan: no part-0 vertex may touch a part-1 vertex."""
    for u in range(g.n):
        if labels[u] == 0 and any(labels[v] == 1 for v in g.adj[u]):
            raise InvariantError(f"edge joins both parts at vertex {u}")
    return True


def check_separator_dist(frag: DistGraph, comm: Comm, labels):
    full = halo_exchange(frag, comm, labels)
    for i in range(frag.nlocal):
        if labels[i] != 0:
            continue
        for k in frag.arcs_of(i):
            if full[frag.edge_gst[k]] == 1:
                raise InvariantError(
                    f"edge joins both parts at global vertex {frag.vglb[i]}"
                )
    return True


# -- sequential refinement ----------------------------------------------------


def fm_refine(g: Graph, labels, params: OrderParams, protected=frozenset()):
    """Hill-climbing separator refinement; never returns a worse cost.

    Each move sends a separator vertex into a part and pulls its neighbors
    of the other part into the separator; a vertex moves out at most once
    per pass. Up to ``fm_backtrack`` consecutive non-improving moves are
    tolerated before the pass rolls back to its best state. Vertices in
    ``protected`` are never pulled into the separator.
    """
    labels = list(labels)
    vw = g.vwgt
    tol = params.balance_tol
    w = list(part_weights(labels, vw))
    total = sum(w)

    def key(w0, w1, ws):
        imb = abs(w0 - w1) / total if total else 0.0
        excess = imb - tol if imb > tol else 0.0
        return (1 if excess > 0 else 0, ws, excess, imb)

    best_key = key(*w)
    sep = {v for v in range(g.n) if labels[v] == 2}
    for _ in range(params.fm_passes):
        pass_key = best_key
        locked = set()
        trail = []
        best_len = 0
        bad = 0
        while True:
            chosen = None
            chosen_key = None
            for v in sorted(sep - locked):
                for side in (0, 1):
                    pulled = [u for u in g.adj[v] if labels[u] == 1 - side]
                    if any(u in protected for u in pulled):
                        continue
                    pw = sum(vw[u] for u in pulled)
                    nw0 = w[0] + (vw[v] if side == 0 else -pw)
                    nw1 = w[1] + (vw[v] if side == 1 else -pw)
                    nws = w[2] - vw[v] + pw
                    k = key(nw0, nw1, nws)
                    if chosen_key is None or k < chosen_key:
                        chosen_key = k
                        chosen = (v, side, pulled, [nw0, nw1, nws])
            if chosen is None:
                break
            v, side, pulled, w = chosen
            labels[v] = side
            sep.discard(v)
            for u in pulled:
                labels[u] = 2
                sep.add(u)
            locked.add(v)
            trail.append((v, side, pulled))
            if chosen_key < best_key:
                best_key = chosen_key
                best_len = len(trail)
                bad = 0
            else:
                bad += 1
                if bad > params.fm_backtrack:
                    break
        while len(trail) > best_len:
            v, side, pulled = trail.pop()
            for u in pulled:
                labels[u] = 1 - side
                sep.discard(u)
            labels[v] = 2
            sep.add(v)
        w = list(part_weights(labels, vw))
        if best_key >= pass_key:
            break
    return labels, tuple(w)


def _grown_partition(g: Graph, seed_vertex):
    """Grow a region to half the total weight; its frontier separates.

    Greedy growth: each step absorbs the fringe vertex that keeps the
    region frontier lightest, so the would-be separator stays thin.
    """
    n = g.n
    if n == 1:
        return [0]
    half = g.total_vwgt() / 2
    in_region = [False] * n
    out_degree = [len(g.adj[v]) for v in range(n)]   # neighbors outside
    fringe = set()
    grown = weight = 0
    next_fresh = 0
    current = seed_vertex
    # never absorb the whole graph: the complement must stay non-empty
    while grown < n - 1:
        in_region[current] = True
        fringe.discard(current)
        grown += 1
        weight += g.vwgt[current]
        for u in g.adj[current]:
            out_degree[u] -= 1
            if not in_region[u]:
                fringe.add(u)
        if weight >= half:
            break
        if fringe:
            # frontier change if v joins: v itself starts touching outside
            # vertices, while its absorbed neighbors may stop doing so
            best = None
            for v in fringe:
                delta = g.vwgt[v] if out_degree[v] > 0 else 0
                for u in g.adj[v]:
                    if in_region[u] and out_degree[u] == 1:
                        delta -= g.vwgt[u]
                k = (delta, out_degree[v], v)
                if best is None or k < best:
                    best = k
                    current = v
        else:
            # disconnected: hop to the lowest-index untouched vertex
            while in_region[next_fresh]:
                next_fresh += 1
            current = next_fresh
    labels = []
    for v in range(n):
        if not in_region[v]:
            labels.append(1)
        elif out_degree[v] > 0:
            labels.append(2)
        else:
            labels.append(0)
    return labels


def initial_separator(g: Graph, rng, params: OrderParams):
    """Best of several grown-and-refined separators on a small graph."""
    if g.n == 0:
        return [], (0, 0, 0)
    tries = max(1, params.tries)
    # distinct random growth seeds, so no attempt is wasted on a repeat
    seeds = rng.sample(range(g.n), min(tries, g.n))
    best = None
    for seed_vertex in seeds:
        labels = _grown_partition(g, seed_vertex)
        labels, w = fm_refine(g, labels, params)
        k = cost_key(w, params.balance_tol)
        if best is None or k < best[0]:
            best = (k, labels, w)
    if params.validate:
        check_separator(g, best[1])
    return best[1], best[2]


# -- band graphs ---------------------------------------------------------------


@dataclass
class BandGraph:
    """Centralized copy of the vertices near a separator, plus anchors."""

    graph: Graph
    vertex_ids: list          # band position -> global vertex id
    labels: list              # includes the two anchors when present
    dist: list                # hop distance from the separator
    anchor0: int | None = None
    anchor1: int | None = None

    @property
    def protected(self):
        if self.anchor0 is None:
            return frozenset()
        return frozenset((self.anchor0, self.anchor1))


def _band_flags(frag: DistGraph, comm: Comm, labels, width):
    """Multi-source BFS from the separator, one halo exchange per hop."""
    horizon = width + 1
    dist = [0 if lab == 2 else horizon for lab in labels]
    for hop in range(1, width + 1):
        full = halo_exchange(frag, comm, dist)
        for i in range(frag.nlocal):
            if dist[i] > hop:
                for k in frag.arcs_of(i):
                    if full[frag.edge_gst[k]] == hop - 1:
                        dist[i] = hop
                        break
    full = halo_exchange(frag, comm, dist)
    return dist, full


def band_extract(frag: DistGraph, comm: Comm, labels, weights, width,
                 root=None):
    """Collective: centralize the width-hop ball around the separator.

    Two anchor vertices stand in for the vertices each part loses: an
    anchor carries their total weight and connects to the retained part
    vertices lying exactly ``width`` hops from the separator. Returns the
    BandGraph (on every rank, or only on ``root`` when given); raises if
    the separator is empty.
    """
    if weights[2] == 0:
        raise InvariantError("cannot extract a band around an empty separator")
    dist, full = _band_flags(frag, comm, labels, width)
    return _assemble_band(frag, comm, labels, weights, width, dist, full, root)


def _assemble_band(frag, comm, labels, weights, width, dist, full, root):
    w0, w1, _ = weights
    payload = []
    for i in range(frag.nlocal):
        if dist[i] > width:
            continue
        row = [(frag.edge_loc[k], frag.edge_wgt[k]) for k in frag.arcs_of(i)
               if full[frag.edge_gst[k]] <= width]
        payload.append((frag.vglb[i], frag.vwgt[i], labels[i], dist[i], row))
    if root is None:
        data = comm.allgather(payload, tag="band")
    else:
        data = comm.gather(payload, root=root, tag="band")
        if data is None:
            return None
    entries = sorted(e for chunk in data for e in chunk)
    index = {gid: i for i, (gid, _, _, _, _) in enumerate(entries)}
    nb = len(entries)
    adj = [[index[v] for v, _ in row] for _, _, _, _, row in entries]
    ewgt = [[w for _, w in row] for _, _, _, _, row in entries]
    vwgt = [w for _, w, _, _, _ in entries]
    blabels = [lab for _, _, lab, _, _ in entries]
    bdist = [d for _, _, _, d, _ in entries]
    ids = [gid for gid, _, _, _, _ in entries]

    kept0 = sum(w for w, lab in zip(vwgt, blabels) if lab == 0)
    kept1 = sum(w for w, lab in zip(vwgt, blabels) if lab == 1)
    a0, a1 = nb, nb + 1
    vwgt = vwgt + [w0 - kept0, w1 - kept1]
    adj = adj + [[], []]
    ewgt = ewgt + [[], []]
    for v in range(nb):
        if bdist[v] == width and blabels[v] in (0, 1):
            anchor = a0 if blabels[v] == 0 else a1
            adj[anchor].append(v)
            ewgt[anchor].append(1)
            adj[v].append(anchor)
            ewgt[v].append(1)
    band = Graph(nb + 2, adj, ewgt, vwgt=vwgt, labels=ids + [-1, -2])
    return BandGraph(band, ids, blabels + [0, 1], bdist + [0, 0], a0, a1)


def _centralize_whole(frag: DistGraph, comm: Comm, labels, root=None):
    payload = []
    for i in range(frag.nlocal):
        row = [(frag.edge_loc[k], frag.edge_wgt[k]) for k in frag.arcs_of(i)]
        payload.append((frag.vglb[i], frag.vwgt[i], labels[i], 0, row))
    if root is None:
        data = comm.allgather(payload, tag="band")
    else:
        data = comm.gather(payload, root=root, tag="band")
        if data is None:
            return None
    entries = sorted(e for chunk in data for e in chunk)
    index = {gid: i for i, (gid, _, _, _, _) in enumerate(entries)}
    adj = [[index[v] for v, _ in row] for _, _, _, _, row in entries]
    ewgt = [[w for _, w in row] for _, _, _, _, row in entries]
    band = Graph(len(entries), adj, ewgt,
                 vwgt=[w for _, w, _, _, _ in entries],
                 labels=[gid for gid, _, _, _, _ in entries])
    return BandGraph(band, [gid for gid, _, _, _, _ in entries],
                     [lab for _, _, lab, _, _ in entries],
                     [0] * len(entries))


def _perturb(band: Graph, labels, protected, rng, moves):
    for _ in range(moves):
        sep = sorted(v for v in range(band.n) if labels[v] == 2)
        if not sep:
            return
        v = sep[rng.randrange(len(sep))]
        side = rng.randrange(2)
        pulled = [u for u in band.adj[v] if labels[u] == 1 - side]
        if any(u in protected for u in pulled):
            continue
        labels[v] = side
        for u in pulled:
            labels[u] = 2


def band_refine_multiseq(frag: DistGraph, comm: Comm, labels, weights,
                         params: OrderParams):
    """Collective: refine the separator on replicated band copies.

    Every rank refines its own centralized copy of the band, rank 0 from
    the projected state, the others from randomly perturbed starts; the
    best candidate (cost order, ties to the lowest rank) is projected back.
    A band too large to replicate is refined on rank 0 alone. A candidate
    that moved an anchor out of its part is discarded.
    """
    w = tuple(weights)
    if w[2] == 0:
        return list(labels), w       # nothing to refine around
    width = params.band_width
    if width > 0:
        dist, full = _band_flags(frag, comm, labels, width)
        nband = comm.allreduce_sum(sum(1 for d in dist if d <= width))
    else:
        nband = frag.nglobal
    root_only = nband > params.band_max
    root = 0 if root_only else None
    if width > 0:
        bg = _assemble_band(frag, comm, labels, w, width, dist, full, root)
    else:
        bg = _centralize_whole(frag, comm, labels, root=root)

    candidate = None
    if bg is not None:
        start = list(bg.labels)
        if not root_only and comm.rank > 0:
            _perturb(bg.graph, start, bg.protected, comm.rng,
                     params.perturb_moves)
        refined, wref = fm_refine(bg.graph, start, params, bg.protected)
        valid = True
        if bg.anchor0 is not None:
            valid = refined[bg.anchor0] == 0 and refined[bg.anchor1] == 1
        if valid:
            band_only = refined[:len(bg.vertex_ids)]
            candidate = (cost_key(wref, params.balance_tol), band_only, wref)

    if root_only:
        winner = comm.bcast(candidate, root=0)
        if winner is None:
            return list(labels), w   # root produced no valid candidate
        _, band_labels, wref = winner
    else:
        entries = comm.allgather(
            (candidate[0], comm.rank) if candidate else None, tag="band-key")
        ranked = [e for e in entries if e is not None]
        if not ranked:
            return list(labels), w
        _, win_rank = min(ranked)
        _, band_labels, wref = comm.bcast(
            candidate if comm.rank == win_rank else None, root=win_rank)

    out = list(labels)
    ids = comm.bcast(bg.vertex_ids if bg is not None else None, root=0) \
        if root_only else bg.vertex_ids
    for gid, lab in zip(ids, band_labels):
        if frag.is_local(gid):
            out[frag.local_of(gid)] = lab
    if params.validate:
        check_separator_dist(frag, comm, out)
    return out, tuple(wref)


# -- uncoarsening ---------------------------------------------------------------


def _project(step: CoarsenStep, labels):
    """Collective: copy coarse labels down to the fine vertices."""
    coarse, comm = step.coarse, step.comm
    need = {}
    for cg in step.f2c:
        need.setdefault(coarse.owner_of(cg), set()).add(cg)
    requests = [(dst, "proj-req", sorted(gids)) for dst, gids in sorted(need.items())]
    incoming = step.comm.send_all(requests)
    replies = []
    for m in incoming:
        replies.append((m.src, "proj-rep",
                        (m.payload, [labels[coarse.local_of(g)] for g in m.payload])))
    got = {}
    for m in comm.send_all(replies):
        gids, labs = m.payload
        got.update(zip(gids, labs))
    return [got[cg] for cg in step.f2c]


def _unfold(step: FoldStep, labels, weights, params: OrderParams):
    """Collective: pick the better half's partition, push labels back."""
    parent, sub = step.parent_comm, step.sub_comm
    entry = (cost_key(weights, params.balance_tol), sub.side, tuple(weights))
    entries = parent.allgather(entry, tag="unfold-key")
    _, winner, wwin = min(entries)
    plan = next(p for p in step.plans if p.side == winner)

    out = []
    post = step.post
    if sub.side == winner:
        for ri, receiver in enumerate(plan.recv):
            if receiver != parent.rank:
                continue
            for gs, ge, src in plan.chunks[ri]:
                vals = [labels[post.local_of(g)] for g in range(gs, ge)]
                out.append(Message(parent.rank, src, "unfold", (gs, vals)))
    incoming = parent.exchange(out)

    pre = step.pre
    result = [None] * pre.nlocal
    if sub.side == winner:
        for i, g in enumerate(pre.vglb):
            result[i] = labels[post.local_of(g)]
    for m in incoming:
        gs, vals = m.payload
        for off, val in enumerate(vals):
            result[pre.local_of(gs + off)] = val
    if any(v is None for v in result):
        raise InvariantError("unfold left a vertex unlabeled")
    return result, wwin


def uncoarsen(steps, labels, weights, params: OrderParams):
    """Walk the level records coarsest-to-finest, refining at each level."""
    for step in reversed(steps):
        if isinstance(step, FoldStep):
            labels, weights = _unfold(step, labels, weights, params)
        else:
            labels = _project(step, labels)
            if params.validate:
                check_separator_dist(step.fine, step.comm, labels)
            labels, weights = band_refine_multiseq(
                step.fine, step.comm, labels, weights, params)
    return labels, weights


def separate_graph(frag: DistGraph, comm: Comm, params: OrderParams) -> Partition:
    """Collective: the full multilevel separator pipeline on one graph."""
    if frag.nglobal == 0:
        return Partition([])
    steps, bottom, bottom_comm = coarsen_to_bottom(frag, comm, params)
    coarsest = bottom.to_local_graph()
    labels, weights = initial_separator(coarsest, bottom_comm.rng, params)
    if steps:
        labels, weights = uncoarsen(steps, labels, weights, params)
    else:
        labels, weights = band_refine_multiseq(frag, comm, labels, weights, params)
    if params.validate:
        check_separator_dist(frag, comm, labels)
    return Partition(labels, *weights)
