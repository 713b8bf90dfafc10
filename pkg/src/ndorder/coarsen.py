"""Multilevel coarsening by synchronous probabilistic heavy-edge matching.

Each round, every rank drains a queue of its unmatched vertices: a mate is
picked at random among the available neighbors joined by edges of heaviest
weight; local pairs are recorded immediately, remote candidates produce a
mating request and both endpoints become temporarily unavailable. Query
buffers are then exchanged, feasible requests granted (competing ones go
to the lowest requesting global index), refusals unlock and re-enqueue
their vertices. Rounds repeat until few unmatched vertices remain.

Matched pairs collapse into coarse vertices kept on the rank owning the
lower global endpoint. Once the average number of vertices per rank falls
below the fold threshold, the coarse graph is folded-with-duplication onto
both half groups, which continue coarsening independently until every rank
holds a complete coarsest graph.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .distgraph import DistGraph, fold, halo_exchange
from .errors import InvariantError
from .params import OrderParams
from .procsim import Comm, Message

__all__ = [
    "Matching",
    "CoarsenStep",
    "FoldStep",
    "match",
    "coarse_build",
    "coarsen_to_bottom",
    "check_matching",
]

# a level is "almost matched" when this share of vertices is still free
STOP_FRACTION = 0.02


@dataclass
class Matching:
    """Per-local partner global index (-1 = left unmatched at this level)."""

    partner: list
    rounds: int = 0


@dataclass
class CoarsenStep:
    fine: DistGraph
    coarse: DistGraph
    f2c: list                    # coarse global id per fine local vertex
    comm: Comm
    fold_action: str = "none"    # "fold-dup" when one followed this level


@dataclass
class FoldStep:
    pre: DistGraph
    post: DistGraph
    plans: list
    parent_comm: Comm
    sub_comm: Comm


def match(frag: DistGraph, comm: Comm, rng, params: OrderParams) -> Matching:
    """Collective: heavy-edge random matching across the group."""
    nlocal = frag.nlocal
    partner = [-1] * nlocal
    taken = [False] * nlocal          # matched or given up
    ghost_taken = [False] * frag.nghost
    queue = deque(range(nlocal))
    rounds = 0

    while rounds < params.match_passes:
        rounds += 1
        locked = set()
        pending = {}                   # local -> requested ghost global
        ghost_locked = set()
        requests = {}                  # dst rank -> [(src_gid, dst_gid)]

        while queue:
            i = queue.popleft()
            if taken[i] or i in locked:
                continue
            best_w = 0
            cands = []
            for k in frag.arcs_of(i):
                t = frag.edge_gst[k]
                if t < nlocal:
                    if taken[t] or t in locked:
                        continue
                else:
                    s = t - nlocal
                    if ghost_taken[s] or s in ghost_locked:
                        continue
                w = frag.edge_wgt[k]
                if w > best_w:
                    best_w = w
                    cands = [t]
                elif w == best_w:
                    cands.append(t)
            if not cands:
                taken[i] = True        # unmatched at this level, final
                continue
            t = cands[rng.randrange(len(cands))] if len(cands) > 1 else cands[0]
            if t < nlocal:
                partner[i] = frag.vglb[t]
                partner[t] = frag.vglb[i]
                taken[i] = taken[t] = True
            else:
                s = t - nlocal
                g = frag.ghost_glb[s]
                locked.add(i)
                pending[i] = g
                ghost_locked.add(s)
                requests.setdefault(frag.owner_of(g), []).append((frag.vglb[i], g))

        incoming = comm.exchange([Message(comm.rank, dst, "match-req", reqs)
                                  for dst, reqs in sorted(requests.items())])
        by_target = {}
        for m in incoming:
            for src_gid, tgt_gid in m.payload:
                by_target.setdefault(frag.local_of(tgt_gid), []).append(src_gid)

        replies = {}                   # dst rank -> [(requester, target, verdict)]

        def reply(req_gid, tgt_gid, verdict):
            replies.setdefault(frag.owner_of(req_gid), []).append(
                (req_gid, tgt_gid, verdict))

        for v in sorted(by_target):
            reqs = sorted(by_target[v])
            gv = frag.vglb[v]
            if v in locked and pending[v] in reqs:
                # mutual request: both sides record it, nobody replies
                want = pending.pop(v)
                locked.discard(v)
                partner[v] = want
                taken[v] = True
                ghost_taken[frag._ghost_slot[want] - nlocal] = True
                for rg in reqs:
                    if rg != want:
                        reply(rg, gv, "matched")
            elif v in locked:
                for rg in reqs:
                    reply(rg, gv, "busy")
            elif taken[v]:
                for rg in reqs:
                    reply(rg, gv, "matched")
            else:
                winner = reqs[0]       # lowest global index wins
                partner[v] = winner
                taken[v] = True
                ghost_taken[frag._ghost_slot[winner] - nlocal] = True
                reply(winner, gv, "accept")
                for rg in reqs[1:]:
                    reply(rg, gv, "matched")

        answers = comm.exchange([Message(comm.rank, dst, "match-rep", data)
                                 for dst, data in sorted(replies.items())])
        for m in answers:
            for req_gid, tgt_gid, verdict in m.payload:
                i = frag.local_of(req_gid)
                s = frag._ghost_slot[tgt_gid] - nlocal
                locked.discard(i)
                pending.pop(i, None)
                if verdict == "accept":
                    partner[i] = tgt_gid
                    taken[i] = True
                    ghost_taken[s] = True
                else:
                    if verdict == "matched":
                        ghost_taken[s] = True
                    queue.append(i)

        if locked or pending:
            raise InvariantError("matching round left unresolved requests")

        # refresh the ghosts' view of who is still available
        full = halo_exchange(frag, comm, taken)
        ghost_taken = full[nlocal:]

        free = sum(1 for i in range(nlocal) if not taken[i])
        total_free = comm.allreduce_sum(free)
        if total_free <= STOP_FRACTION * frag.nglobal:
            break

    return Matching(partner, rounds)


def check_matching(frag: DistGraph, comm: Comm, matching: Matching):
    """Collective: verify symmetry, uniqueness and the neighbor property."""
    partner = matching.partner
    claims = {}
    for i, pg in enumerate(partner):
        if pg < 0:
            continue
        g = frag.vglb[i]
        if pg == g:
            raise InvariantError(f"vertex {g} matched with itself")
        if pg not in (frag.edge_loc[k] for k in frag.arcs_of(i)):
            raise InvariantError(f"partner {pg} of {g} is not a neighbor")
        claims.setdefault(frag.owner_of(pg), []).append((g, pg))
    incoming = comm.exchange([Message(comm.rank, dst, "match-check", data)
                              for dst, data in sorted(claims.items())])
    for m in incoming:
        for g, pg in m.payload:
            if partner[frag.local_of(pg)] != g:
                raise InvariantError(f"match ({g},{pg}) is not symmetric")
    return True


def coarse_build(frag: DistGraph, comm: Comm, matching: Matching) -> CoarsenStep:
    """Collective: collapse a matching into the coarse graph.

    Coarse vertices stay on the rank owning the lower fine endpoint;
    parallel edges merge with summed weights, pair-internal edges vanish,
    vertex weights add up.
    """
    nlocal = frag.nlocal
    partner = matching.partner

    mine = []                          # ("s", i) | ("p", i, j) | ("pr", i, pg)
    for i in range(nlocal):
        g = frag.vglb[i]
        pg = partner[i]
        if pg < 0:
            mine.append(("s", i, None))
        elif frag.is_local(pg):
            if g < pg:
                mine.append(("p", i, frag.local_of(pg)))
        elif g < pg:
            mine.append(("pr", i, pg))

    counts = comm.allgather(len(mine), tag="coarse-count")
    offset = sum(counts[:comm.rank])
    ncoarse = sum(counts)

    f2c = [-1] * nlocal
    notify = {}
    for idx, (kind, i, other) in enumerate(mine):
        cid = offset + idx
        f2c[i] = cid
        if kind == "p":
            f2c[other] = cid
        elif kind == "pr":
            notify.setdefault(frag.owner_of(other), []).append((other, cid))
    incoming = comm.exchange([Message(comm.rank, dst, "coarse-id", data)
                              for dst, data in sorted(notify.items())])
    for m in incoming:
        for g, cid in m.payload:
            f2c[frag.local_of(g)] = cid
    if any(c < 0 for c in f2c):
        raise InvariantError("matching left a fine vertex without a coarse image")

    full = halo_exchange(frag, comm, f2c)

    # adjacency of the non-owning side of cross pairs moves to the owner
    ship = {}
    for i in range(nlocal):
        g = frag.vglb[i]
        pg = partner[i]
        if 0 <= pg < g and not frag.is_local(pg):
            arcs = [(full[frag.edge_gst[k]], frag.edge_wgt[k])
                    for k in frag.arcs_of(i)]
            ship.setdefault(frag.owner_of(pg), []).append((g, frag.vwgt[i], arcs))
    shipped = {}
    for m in comm.exchange([Message(comm.rank, dst, "coarse-adj", data)
                            for dst, data in sorted(ship.items())]):
        for g, w, arcs in m.payload:
            shipped[g] = (w, arcs)

    cvwgt, cvert, cvend, celoc, cewgt = [], [], [], [], []
    for idx, (kind, i, other) in enumerate(mine):
        cid = offset + idx
        acc = {}
        weight = frag.vwgt[i]
        for k in frag.arcs_of(i):
            c = full[frag.edge_gst[k]]
            if c != cid:
                acc[c] = acc.get(c, 0) + frag.edge_wgt[k]
        if kind == "p":
            weight += frag.vwgt[other]
            for k in frag.arcs_of(other):
                c = full[frag.edge_gst[k]]
                if c != cid:
                    acc[c] = acc.get(c, 0) + frag.edge_wgt[k]
        elif kind == "pr":
            w, arcs = shipped[partner[i]]
            weight += w
            for c, ew in arcs:
                if c != cid:
                    acc[c] = acc.get(c, 0) + ew
        cvwgt.append(weight)
        cvert.append(len(celoc))
        for c in sorted(acc):
            celoc.append(c)
            cewgt.append(acc[c])
        cvend.append(len(celoc))

    narcs = comm.allreduce_sum(len(celoc))
    cum = [0]
    for c in counts:
        cum.append(cum[-1] + c)
    segments = [(cum[r], cum[r + 1], r) for r in range(comm.size) if counts[r]]
    cvglb = list(range(offset, offset + len(mine)))
    coarse = DistGraph(ncoarse, narcs, segments, comm.rank, cvglb, cvwgt,
                       list(cvglb), cvert, cvend, celoc, cewgt, base=frag.base)
    coarse._index_ghosts()
    coarse.register_halo(comm)
    return CoarsenStep(fine=frag, coarse=coarse, f2c=f2c, comm=comm)


def coarsen_to_bottom(frag: DistGraph, comm: Comm, params: OrderParams):
    """Collective: coarsen until every rank holds a complete coarsest graph.

    Returns (steps, bottom fragment, bottom communicator). Steps record the
    coarsening levels and the fold-dup events between them, finest first;
    after the group shrinks to single ranks the levels continue
    sequentially and diverge per rank.
    """
    g, c = frag, comm
    steps = []

    def fold_dup():
        nonlocal g, c
        folded, plans = fold(g, c, duplicate=True)
        sub = c.split()
        folded.register_halo(sub)
        if steps and isinstance(steps[-1], CoarsenStep):
            steps[-1].fold_action = "fold-dup"
        steps.append(FoldStep(pre=g, post=folded, plans=plans,
                              parent_comm=c, sub_comm=sub))
        g, c = folded, sub

    while True:
        while c.size > 1 and g.nglobal < params.fold_min * c.size:
            fold_dup()
        if g.nglobal <= params.coarsest_size:
            break
        matching = match(g, c, c.rng, params)
        if params.validate:
            check_matching(g, c, matching)
        step = coarse_build(g, c, matching)
        if params.validate:
            step.coarse.check()
        if step.coarse.nglobal > params.ratio_max * g.nglobal:
            break                      # stalled (few edges left to collapse)
        steps.append(step)
        g = step.coarse

    while c.size > 1:
        fold_dup()
    return steps, g, c
