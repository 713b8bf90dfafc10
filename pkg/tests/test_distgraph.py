import random

import pytest

from conftest import canonical_edges, run_on
from ndorder.distgraph import (
    block_owners,
    build,
    centralize,
    fold,
    halo_exchange,
    induced_subgraph,
    singleton_fragment,
)
from ndorder.errors import GraphFormatError, InvariantError
from ndorder.io import gen_grid2d, gen_random


def path3_frags():
    # path 1-2-3 (0-based: 0-1-2), vertices {0,1} on rank 0, {2} on rank 1
    adj = [[1], [0, 2], [1]]
    return build(adj, [0, 0, 1])


def test_build_path_split_ghosts():
    f0, f1 = path3_frags()
    assert f0.nlocal == 2 and f0.nghost == 1 and f0.ghost_glb == [2]
    assert f1.nlocal == 1 and f1.nghost == 1 and f1.ghost_glb == [1]
    f0.check()
    f1.check()


def test_build_single_rank_no_ghosts():
    g = gen_grid2d(3)
    (frag,) = build(g.adj, [0] * g.n)
    assert frag.nghost == 0
    assert frag.to_local_graph().check().nedges == 12


def test_build_rejects_asymmetric():
    with pytest.raises(GraphFormatError):
        build([[1], []], [0, 0])


def test_build_rejects_self_loop():
    with pytest.raises(GraphFormatError):
        build([[0, 1], [0]], [0, 0])


def test_adjacency_arrays_match_figure_layout():
    # three ranks, base 1; rank 1 owns globals 11..20 and its second local
    # vertex (global 12) has start index 2, after-end index 5 and the
    # neighbors 19, 2, 11 in its global adjacency array
    base = 1
    n = 30
    adj = [[] for _ in range(n)]

    def connect(a, b):
        adj[a - base].append(b)
        adj[b - base].append(a)

    connect(12, 19)
    connect(2, 12)
    connect(11, 12)
    owners = [0] * 10 + [1] * 10 + [2] * 10
    frags = build(adj, owners, base=base)
    f1 = frags[1]
    # global index of local vertex i on rank p is range_start + i (1-based i
    # with a base-1 range table)
    start1 = [s for s, e, r in f1.segments if r == 1][0] + base
    assert start1 + 2 - base == 12
    i = f1.local_of(12 - base)
    # the caption's start/after-end indices are base-1 like everything else
    assert f1.vert_loc[i] + base == 2 and f1.vend_loc[i] + base == 5
    assert [f1.edge_loc[k] + base for k in f1.arcs_of(i)] == [19, 2, 11]
    assert f1.owner_of(12 - base) == 1


def test_owner_of_boundaries():
    frags = build([[] for _ in range(30)], block_owners(30, 3))
    f = frags[0]
    assert f.owner_of(0) == 0
    assert f.owner_of(10) == 1       # range start maps to its own rank
    assert f.owner_of(25) == 2
    with pytest.raises(InvariantError):
        f.owner_of(30)
    with pytest.raises(InvariantError):
        f.owner_of(-1)


def test_halo_exchange_path():
    frags = path3_frags()
    data = {0: [10, 20], 1: [30]}

    def prog(comm, frag):
        return halo_exchange(frag, comm, data[comm.rank])

    r0, r1 = run_on(frags, prog)
    assert r0 == [10, 20, 30]
    assert r1 == [30, 20]


def test_halo_exchange_single_rank_identity():
    g = gen_grid2d(2)
    (frag,) = build(g.adj, [0] * g.n)
    (res,) = run_on([frag], lambda comm, f: halo_exchange(f, comm, [5, 6, 7, 8]))
    assert res == [5, 6, 7, 8]


def test_halo_exchange_idempotent():
    frags = path3_frags()
    data = {0: [1, 2], 1: [3]}

    def prog(comm, frag):
        a = halo_exchange(frag, comm, data[comm.rank])
        b = halo_exchange(frag, comm, data[comm.rank])
        return a, b

    for a, b in run_on(frags, prog):
        assert a == b


def test_halo_exchange_length_mismatch():
    frags = path3_frags()

    def prog(comm, frag):
        if comm.rank == 0:
            with pytest.raises(InvariantError):
                halo_exchange(frag, comm, [1, 2, 3, 4, 5])
        return True

    # only rank 0 raises before communicating, so run it alone
    (frag,) = build([[1], [0]], [0, 0], nparts=1)
    (ok,) = run_on([frag], lambda comm, f: prog(comm, f))
    assert ok


def test_ghost_numbering_sorted_by_owner_then_global():
    # star-ish graph scattered over 3 ranks
    g = gen_random(12, 26, seed=3)
    frags = build(g.adj, block_owners(12, 3))
    for f in frags:
        keys = [(f.owner_of(x), x) for x in f.ghost_glb]
        assert keys == sorted(keys)
        f.check()


def test_no_rank_stores_ghost_adjacency():
    g = gen_grid2d(4)
    frags = build(g.adj, block_owners(g.n, 4))
    for f in frags:
        assert len(f.vert_loc) == f.nlocal
        arcs_here = sum(f.vend_loc[i] - f.vert_loc[i] for i in range(f.nlocal))
        assert f.storage_units() == f.nlocal + arcs_here + f.nghost


def test_induced_all_true_is_identity():
    g = gen_grid2d(3)
    frags = build(g.adj, block_owners(g.n, 2))

    def prog(comm, frag):
        sub, m = induced_subgraph(frag, comm, [True] * frag.nlocal)
        sub.check()
        return sub.local_edges(), m

    res = run_on(frags, prog)
    before = canonical_edges([f.local_edges() for f in frags])
    after = canonical_edges([edges for edges, _ in res])
    assert before == after
    mapping = {}
    for _, m in res:
        mapping.update(m)
    assert mapping == {g: g for g in range(9)}


def test_induced_one_endpoint_per_edge_is_edgeless():
    g = gen_grid2d(3)
    frags = build(g.adj, block_owners(g.n, 2))
    # checkerboard: no two selected vertices adjacent
    select = {v for v in range(9) if (v // 3 + v % 3) % 2 == 0}

    def prog(comm, frag):
        flags = [gv in select for gv in frag.vglb]
        sub, _ = induced_subgraph(frag, comm, flags)
        return sub.nglobal, len(sub.local_edges())

    res = run_on(frags, prog)
    assert sum(n for n, _ in res) == 5 * 2
    assert all(e == 0 for _, e in res)


def brute_induced(g, keep):
    ids = [v for v in range(g.n) if keep[v]]
    pos = {v: i for i, v in enumerate(ids)}
    edges = {(pos[u], pos[v]) for u in ids for v in g.adj[u] if v in pos and u < v}
    return len(ids), sorted(edges)


def test_induced_left_columns_of_grid():
    g = gen_grid2d(3)
    keep = [v % 3 < 2 for v in range(9)]
    nsel, expect = brute_induced(g, keep)
    assert (nsel, len(expect)) == (6, 7)
    frags = build(g.adj, block_owners(9, 3))

    def prog(comm, frag):
        flags = [keep[gv] for gv in frag.vglb]
        sub, mapping = induced_subgraph(frag, comm, flags)
        return sub.local_edges(), mapping

    res = run_on(frags, prog)
    mapping = {}
    for _, m in res:
        mapping.update(m)
    # subgraph arcs already carry the new numbering
    got = sorted({(min(u, v), max(u, v))
                  for arcs, _ in res for u, v, _ in arcs})
    expect_edges = sorted({(min(mapping[u], mapping[v]), max(mapping[u], mapping[v]))
                           for u in range(9) if keep[u]
                           for v in g.adj[u] if keep[v]})
    assert got == expect_edges
    assert len(got) == 7


def test_fold_balances_vertex_counts():
    adj = [[] for _ in range(8)]
    for u in range(7):
        adj[u].append(u + 1)
        adj[u + 1].append(u)
    frags = build(adj, block_owners(8, 4))

    def prog(comm, frag):
        folded, _ = fold(frag, comm, side=0)
        sub = comm.split()
        if folded is not None:
            folded.register_halo(sub)
            folded.check()
            return folded.nlocal
        return None

    res = run_on(frags, prog)
    assert res == [4, 4, None, None]


def test_fold_duplicate_both_halves_complete():
    g = gen_grid2d(2)
    frags = build(g.adj, block_owners(4, 2))

    def prog(comm, frag):
        folded, _ = fold(frag, comm, duplicate=True)
        sub = comm.split()
        folded.register_halo(sub)
        return sorted(folded.local_edges()), folded.nlocal

    res = run_on(frags, prog)
    for arcs, nloc in res:
        assert nloc == 4
        assert len(arcs) == 8   # both singleton copies hold every arc


@pytest.mark.parametrize("procs,side,duplicate", [
    (4, 0, False), (4, 1, False), (3, 0, False), (5, 1, False), (4, 0, True),
])
def test_fold_preserves_edge_multiset(procs, side, duplicate):
    g = gen_random(20, 45, seed=9)
    frags = build(g.adj, block_owners(20, procs))
    before = canonical_edges([f.local_edges() for f in frags])

    def prog(comm, frag):
        folded, _ = fold(frag, comm, side=side, duplicate=duplicate)
        sub = comm.split()
        if folded is None:
            return None
        folded.register_halo(sub)
        folded.check()
        return sub.side, folded.local_edges(), list(zip(folded.vglb, folded.vwgt))

    res = run_on(frags, prog)
    for target in ((0, 1) if duplicate else (side,)):
        arcs = [r[1] for r in res if r is not None and r[0] == target]
        assert canonical_edges(arcs) == before
        weights = sorted(x for r in res if r is not None and r[0] == target
                         for x in r[2])
        assert weights == [(v, 1) for v in range(20)]


def test_fold_on_singleton_rejected():
    (frag,) = build([[1], [0]], [0, 0], nparts=1)

    def prog(comm, f):
        with pytest.raises(InvariantError):
            fold(f, comm)
        return True

    assert run_on([frag], prog) == [True]


def test_centralize_roundtrip():
    g = gen_random(15, 30, seed=1)
    frags = build(g.adj, block_owners(15, 4))

    def prog(comm, frag):
        whole = centralize(frag, comm)
        return sorted(whole.edges()), whole.vwgt, whole.labels

    res = run_on(frags, prog)
    expect = sorted(g.edges())
    for edges, vwgt, labels in res:
        assert edges == expect
        assert vwgt == g.vwgt
        assert labels == list(range(15))


def test_singleton_fragment_matches_build():
    g = gen_grid2d(3)
    frag = singleton_fragment(g)
    frag.check()
    assert frag.nghost == 0
    assert canonical_edges([frag.local_edges()]) == sorted(g.edges())
    back = frag.to_local_graph()
    assert sorted(back.edges()) == sorted(g.edges())


def test_random_owner_assignment_multi_segment():
    rng = random.Random(5)
    g = gen_random(18, 40, seed=7)
    owners = [rng.randrange(3) for _ in range(18)]
    frags = build(g.adj, owners, nparts=3)
    for f in frags:
        f.check()
    before = canonical_edges([f.local_edges() for f in frags])

    def prog(comm, frag):
        return halo_exchange(frag, comm, list(frag.vglb))

    res = run_on(frags, prog)
    for f, values in zip(frags, res):
        assert values[:f.nlocal] == f.vglb
        assert values[f.nlocal:] == f.ghost_glb
    assert before == canonical_edges([f.local_edges() for f in frags])
