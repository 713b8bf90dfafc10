from itertools import product

import pytest

from conftest import run_on
from ndorder.coarsen import Matching, coarse_build
from ndorder.distgraph import block_owners, build, fold, singleton_fragment
from ndorder.errors import InvariantError
from ndorder.graph import Graph
from ndorder.io import gen_grid2d, gen_path, gen_random, gen_star
from ndorder.params import OrderParams
from ndorder.separate import (
    Partition,
    _project,
    _unfold,
    band_extract,
    band_refine_multiseq,
    check_separator,
    cost_key,
    fm_refine,
    initial_separator,
    part_weights,
    separate_graph,
)
from ndorder.coarsen import FoldStep

TOL = 0.2


def brute_min_key(g, tol=TOL):
    """Exhaustive minimum of the cost order over all valid labelings."""
    best = None
    for lab in product((0, 1, 2), repeat=g.n):
        if any(lab[u] == 0 and lab[v] == 1 for u in range(g.n) for v in g.adj[u]):
            continue
        k = cost_key(part_weights(lab, g.vwgt), tol)
        if best is None or k < best:
            best = k
    return best


def labels_of(res):
    out = {}
    for vglb, part in res:
        for g, lab in zip(vglb, part.labels):
            out[g] = lab
    return [out[i] for i in range(len(out))]


def run_separator(g, procs, seed=0, params=None):
    params = params or OrderParams(validate=True)
    frags = build(g.adj, block_owners(g.n, procs))

    def prog(comm, frag):
        part = separate_graph(frag, comm, params)
        return frag.vglb, part

    return run_on(frags, prog, seed=seed)


# -- initial separator ---------------------------------------------------------


def test_initial_separator_single_vertex():
    import random

    g = gen_path(1)
    labels, w = initial_separator(g, random.Random(0), OrderParams())
    assert labels == [0]
    assert w == (1, 0, 0)


def test_initial_separator_k2():
    import random

    # no labeling of K2 balances within tolerance; whatever wins must be a
    # valid partition with at most one separator vertex
    g = Graph.from_edges(2, [(0, 1)])
    labels, w = initial_separator(g, random.Random(1), OrderParams())
    check_separator(g, labels)
    assert w[2] <= 1


def test_initial_separator_p5_unique_optimum():
    import random

    g = gen_path(5)
    params = OrderParams()
    labels, w = initial_separator(g, random.Random(3), params)
    assert cost_key(w, TOL) == brute_min_key(g) == (0, 1, 0.0, 0.0)
    assert labels[2] == 2
    assert sorted((labels[0], labels[1])) != sorted((labels[3], labels[4]))
    assert w[0] == w[1] == 2


# -- FM refinement ---------------------------------------------------------------


def test_fm_fixed_point_on_optimal_p5():
    g = gen_path(5)
    start = [0, 0, 2, 1, 1]
    labels, w = fm_refine(g, start, OrderParams())
    assert labels == start
    assert w == (2, 2, 1)


def test_fm_improves_unbalanced_p5():
    g = gen_path(5)
    # separator at vertex 1 leaves parts {0} and {2,3,4}
    start = [0, 2, 1, 1, 1]
    labels, w = fm_refine(g, start, OrderParams())
    assert w == (2, 2, 1)
    assert labels == [0, 0, 2, 1, 1]
    assert cost_key(w, TOL) == (0, 1, 0.0, 0.0)


def test_fm_monotone_on_grid_row_separator():
    g = gen_grid2d(3)
    # full middle row as separator, parts = top and bottom rows
    start = [0, 0, 0, 2, 2, 2, 1, 1, 1]
    before = cost_key(part_weights(start, g.vwgt), TOL)
    labels, w = fm_refine(g, start, OrderParams())
    check_separator(g, labels)
    after = cost_key(w, TOL)
    assert after <= before
    assert w[2] <= 3


def test_fm_never_pulls_protected_vertices():
    g = gen_star(5)
    # center in the separator; leaves split 2/2; leaf 4 protected
    start = [2, 0, 0, 1, 1]
    labels, w = fm_refine(g, start, OrderParams(), protected=frozenset((4,)))
    assert labels[4] == 1


@pytest.mark.parametrize("seed", range(8))
def test_fm_monotone_random(seed):
    g = gen_random(24, 50, seed=seed)
    import random

    rng = random.Random(seed)
    start = [rng.choice((0, 1, 2)) for _ in range(g.n)]
    # repair: separate parts by moving offending 0-vertices into the separator
    for u in range(g.n):
        if start[u] == 0 and any(start[v] == 1 for v in g.adj[u]):
            start[u] = 2
    check_separator(g, start)
    before = cost_key(part_weights(start, g.vwgt), TOL)
    labels, w = fm_refine(g, start, OrderParams())
    check_separator(g, labels)
    assert cost_key(w, TOL) <= before


# -- band graphs -----------------------------------------------------------------


def band_on_single_rank(g, labels, width):
    frag = singleton_fragment(g)
    w = part_weights(labels, g.vwgt)

    def prog(comm, f):
        return band_extract(f, comm, labels, w, width)

    (bg,) = run_on([frag], prog)
    return bg


def test_band_extract_p7_width1():
    g = gen_path(7)
    labels = [0, 0, 0, 2, 1, 1, 1]
    bg = band_on_single_rank(g, labels, 1)
    assert bg.vertex_ids == [2, 3, 4]
    assert bg.graph.n == 5
    a0, a1 = bg.anchor0, bg.anchor1
    assert bg.graph.vwgt[a0] == 2 and bg.graph.vwgt[a1] == 2
    assert sorted(bg.graph.adj[a0]) == [bg.vertex_ids.index(2)]
    assert sorted(bg.graph.adj[a1]) == [bg.vertex_ids.index(4)]
    assert bg.labels[a0] == 0 and bg.labels[a1] == 1


def test_band_extract_width_beyond_diameter():
    g = gen_path(5)
    labels = [0, 0, 2, 1, 1]
    bg = band_on_single_rank(g, labels, 10)
    assert bg.vertex_ids == [0, 1, 2, 3, 4]
    assert bg.graph.vwgt[bg.anchor0] == 0
    assert bg.graph.vwgt[bg.anchor1] == 0


def test_band_extract_all_separator():
    g = gen_path(4)
    labels = [2, 2, 2, 2]
    bg = band_on_single_rank(g, labels, 2)
    assert bg.vertex_ids == [0, 1, 2, 3]
    assert bg.graph.adj[bg.anchor0] == []
    assert bg.graph.adj[bg.anchor1] == []
    assert bg.graph.vwgt[bg.anchor0] == 0


def test_band_extract_empty_separator_rejected():
    g = gen_path(4)
    frag = singleton_fragment(g)

    def prog(comm, f):
        with pytest.raises(InvariantError):
            band_extract(f, comm, [0, 0, 0, 0], (4, 0, 0), 1)
        return True

    assert run_on([frag], prog) == [True]


@pytest.mark.parametrize("width", [1, 2, 3])
@pytest.mark.parametrize("procs", [1, 3])
def test_band_is_exact_bfs_ball(width, procs):
    g = gen_random(40, 90, seed=13)
    import random

    rng = random.Random(width * 7 + procs)
    labels = [2 if rng.random() < 0.15 else rng.choice((0, 1)) for _ in range(g.n)]
    for u in range(g.n):
        if labels[u] == 0 and any(labels[v] == 1 for v in g.adj[u]):
            labels[u] = 2
    if all(lab != 2 for lab in labels):
        labels[0] = 2
    w = part_weights(labels, g.vwgt)
    frags = build(g.adj, block_owners(g.n, procs))

    def prog(comm, frag):
        local = [labels[gv] for gv in frag.vglb]
        return band_extract(frag, comm, local, w, width)

    res = run_on(frags, prog)
    # oracle: BFS ball from all separator vertices
    from collections import deque

    dist = {v: 0 for v in range(g.n) if labels[v] == 2}
    q = deque(dist)
    while q:
        u = q.popleft()
        for v in g.adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    expect = sorted(v for v in range(g.n) if dist.get(v, 10 ** 9) <= width)
    for bg in res:
        assert bg.vertex_ids == expect
        for pos, v in enumerate(bg.vertex_ids):
            assert bg.dist[pos] == dist[v]
        # anchors carry exactly the weight the parts lost
        lost0 = sum(1 for v in range(g.n) if labels[v] == 0 and v not in set(expect))
        lost1 = sum(1 for v in range(g.n) if labels[v] == 1 and v not in set(expect))
        assert bg.graph.vwgt[bg.anchor0] == lost0
        assert bg.graph.vwgt[bg.anchor1] == lost1
        # anchor edges go to part vertices at exactly the band width
        for anchor, side in ((bg.anchor0, 0), (bg.anchor1, 1)):
            for b in bg.graph.adj[anchor]:
                assert bg.labels[b] == side
                assert dist[bg.vertex_ids[b]] == width


def test_band_refine_single_rank_matches_plain_fm():
    g = gen_grid2d(5)
    labels = [2 if v % 5 == 2 else (0 if v % 5 < 2 else 1) for v in range(g.n)]
    w = part_weights(labels, g.vwgt)
    params = OrderParams()
    frag = singleton_fragment(g)

    def prog(comm, f):
        return band_refine_multiseq(f, comm, labels, w, params)

    (got_labels, got_w), = run_on([frag], prog)

    def prog2(comm, f):
        bg = band_extract(f, comm, labels, w, params.band_width)
        refined, wr = fm_refine(bg.graph, list(bg.labels), params, bg.protected)
        out = list(labels)
        for gid, lab in zip(bg.vertex_ids, refined[:len(bg.vertex_ids)]):
            out[gid] = lab
        return out, wr

    (exp_labels, exp_w), = run_on([singleton_fragment(g)], prog2)
    assert got_labels == exp_labels
    assert got_w == exp_w


def test_band_refine_never_worse():
    g = gen_grid2d(6)
    labels = [2 if v % 6 == 3 else (0 if v % 6 < 3 else 1) for v in range(g.n)]
    w = part_weights(labels, g.vwgt)
    frags = build(g.adj, block_owners(g.n, 4))
    params = OrderParams()

    def prog(comm, frag):
        local = [labels[gv] for gv in frag.vglb]
        return band_refine_multiseq(frag, comm, local, w, params)

    res = run_on(frags, prog, seed=2)
    for _, wout in res:
        assert cost_key(wout, params.balance_tol) <= cost_key(w, params.balance_tol)


def test_band_refine_falls_back_to_root_when_band_too_large():
    g = gen_grid2d(6)
    labels = [2 if v % 6 == 3 else (0 if v % 6 < 3 else 1) for v in range(g.n)]
    w = part_weights(labels, g.vwgt)
    frags = build(g.adj, block_owners(g.n, 3))
    params = OrderParams(band_max=4)     # any real band exceeds this

    def prog(comm, frag):
        local = [labels[gv] for gv in frag.vglb]
        out, wout = band_refine_multiseq(frag, comm, local, w, params)
        return frag.vglb, Partition(out, *wout)

    res = run_on(frags, prog, seed=1)
    got = labels_of(res)
    check_separator(g, got)
    part = res[0][1]
    assert cost_key((part.w0, part.w1, part.wsep), params.balance_tol) <= \
        cost_key(w, params.balance_tol)


def test_band_refine_zigzag_9x9():
    g = gen_grid2d(9)
    sep = {4 * 9 + c for c in range(5, 9)} | {r * 9 + 4 for r in range(9)}
    assert len(sep) == 13
    labels = []
    for v in range(81):
        r, c = divmod(v, 9)
        if v in sep:
            labels.append(2)
        elif c < 4:
            labels.append(0)
        else:
            labels.append(1)
    check_separator(g, labels)
    w = part_weights(labels, g.vwgt)
    assert w == (36, 32, 13)
    frags = build(g.adj, block_owners(81, 4))
    params = OrderParams(validate=True)

    def prog(comm, frag):
        local = [labels[gv] for gv in frag.vglb]
        out, wout = band_refine_multiseq(frag, comm, local, w, params)
        return frag.vglb, Partition(out, *wout)

    res = run_separator_result = run_on(frags, prog, seed=1)
    wout = res[0][1]
    assert wout.wsep <= 11
    assert wout.imbalance <= params.balance_tol


# -- projection and unfolding ------------------------------------------------------


def test_project_through_coarse_level():
    g = gen_path(4)
    frags = build(g.adj, block_owners(4, 2))
    partner_of = {0: 1, 1: 0, 2: 3, 3: 2}

    def prog(comm, frag):
        partner = [partner_of[gv] for gv in frag.vglb]
        step = coarse_build(frag, comm, Matching(partner))
        coarse_labels = [0 if cg == 0 else 2 for cg in step.coarse.vglb]
        fine = _project(step, coarse_labels)
        return frag.vglb, fine

    res = run_on(frags, prog)
    got = labels_of([(vglb, Partition(f)) for vglb, f in res])
    assert got == [0, 0, 2, 2]


def test_unfold_adopts_better_half():
    g = gen_path(8)
    frags = build(g.adj, block_owners(8, 2))
    params = OrderParams()

    def prog(comm, frag):
        folded, plans = fold(frag, comm, duplicate=True)
        sub = comm.split()
        folded.register_halo(sub)
        step = FoldStep(pre=frag, post=folded, plans=plans,
                        parent_comm=comm, sub_comm=sub)
        if sub.side == 0:
            post_labels = [2 if g == 3 else (0 if g < 3 else 1)
                           for g in folded.vglb]
            weights = (3, 4, 1)
        else:
            post_labels = [2 if g in (2, 5) else (0 if g < 2 else 1)
                           for g in folded.vglb]
            weights = (2, 4, 2)
        labels, wout = _unfold(step, post_labels, weights, params)
        return frag.vglb, Partition(labels, *wout)

    res = run_on(frags, prog)
    got = labels_of(res)
    assert got == [0, 0, 0, 2, 1, 1, 1, 1]      # side 0 won
    for _, part in res:
        assert (part.w0, part.w1, part.wsep) == (3, 4, 1)


# -- the whole pipeline -------------------------------------------------------------


def test_separate_p5_optimal():
    res = run_separator(gen_path(5), 1)
    part = res[0][1]
    assert part.key(TOL) == (0, 1, 0.0, 0.0)


def test_separate_3x3_grid_weight3():
    res = run_separator(gen_grid2d(3), 1)
    part = res[0][1]
    assert part.wsep == 3
    assert part.imbalance <= TOL


@pytest.mark.parametrize("procs", [1, 2, 3])
def test_separate_small_optimum_matches_brute(procs):
    g = gen_random(8, 13, seed=2)
    res = run_separator(g, procs, seed=4)
    part = res[0][1]
    assert part.key(TOL) == brute_min_key(g)


@pytest.mark.parametrize("procs", [1, 2, 4])
@pytest.mark.parametrize("seed", [0, 1])
def test_separate_valid_and_balanced_random(procs, seed):
    g = gen_random(60, 140, seed=17 + seed)
    res = run_separator(g, procs, seed=seed)
    labels = labels_of(res)
    check_separator(g, labels)
    part = res[0][1]
    assert part.total == g.n
    assert part.imbalance <= TOL


def test_separate_grid_separator_quality():
    res = run_separator(gen_grid2d(9), 2, seed=3)
    part = res[0][1]
    assert part.wsep <= 11
    assert part.imbalance <= TOL
