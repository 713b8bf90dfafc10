from ndorder.procsim import run_group


def run_on(frags, fn, seed=0, scheduler="threads"):
    """Run fn(comm, own_fragment) on one rank per fragment."""
    return run_group(len(frags), lambda comm: fn(comm, frags[comm.rank]),
                     seed=seed, scheduler=scheduler)


def canonical_edges(frags_edges):
    """Undirected (u, v, w) multiset from per-rank arc lists."""
    out = []
    for arcs in frags_edges:
        for u, v, w in arcs:
            if u < v:
                out.append((u, v, w))
    return sorted(out)
