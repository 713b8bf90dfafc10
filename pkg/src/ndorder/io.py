"""Graph file formats, permutation files and synthetic test graphs.

Supported inputs are the Chaco/METIS adjacency format and Matrix Market
coordinate files. Chaco files are rejected if asymmetric; Matrix Market
patterns are symmetrized and their diagonal dropped. All external formats
are 1-based, everything in memory is 0-based.
"""

from __future__ import annotations

import random

from .errors import GraphFormatError
from .graph import Graph

__all__ = [
    "read_chaco",
    "write_chaco",
    "read_matrix_market",
    "read_graph_file",
    "write_perm",
    "read_perm",
    "gen_grid2d",
    "gen_grid3d",
    "gen_path",
    "gen_star",
    "gen_random",
    "generate",
]


def _data_lines(text):
    for line in text.splitlines():
        stripped = line.strip()
        if stripped and not stripped.startswith(("%", "#")):
            yield stripped


def read_chaco(text):
    """Parse a Chaco/METIS .graph file into a Graph.

    Header is ``<nvtxs> <nedges> [fmt]``; a 1 in the tens digit of fmt
    enables per-vertex weights. Edge weights (units digit) and vertex
    sizes (hundreds digit) are not supported. The header edge count may
    state undirected edges or arcs; both conventions are accepted.
    """
    # blank lines are meaningful (isolated vertices); only comments drop out
    lines = [ln for ln in text.splitlines()
             if not ln.lstrip().startswith(("%", "#"))]
    while lines and not lines[0].strip():
        lines.pop(0)
    if not lines:
        raise GraphFormatError("empty graph file")
    header = lines[0].split()
    if len(header) < 2:
        raise GraphFormatError("header must give vertex and edge counts")
    try:
        n, nedges = int(header[0]), int(header[1])
        fmt = header[2] if len(header) > 2 else "0"
        ncon = int(header[3]) if len(header) > 3 else 1
    except ValueError as exc:
        raise GraphFormatError(f"bad header: {lines[0]!r}") from exc
    if int(fmt) not in (0, 10):
        raise GraphFormatError(
            f"unsupported format code {fmt!r}: only plain or vertex-weighted "
            "graphs are read (edge weights and vertex sizes are not)"
        )
    has_vwgt = int(fmt) == 10
    body = lines[1:]
    if len(body) < n or any(ln.strip() for ln in body[n:]):
        raise GraphFormatError(f"expected {n} vertex lines, found {len(body)}")

    adj = []
    vwgt = []
    for u, line in enumerate(body[:n]):
        try:
            tokens = [int(t) for t in line.split()]
        except ValueError as exc:
            raise GraphFormatError(f"bad vertex line {u + 1}: {line!r}") from exc
        if has_vwgt:
            if len(tokens) < ncon:
                raise GraphFormatError(f"vertex {u + 1}: missing weight")
            w = tokens[0]
            if w < 1:
                raise GraphFormatError(f"vertex {u + 1}: weight {w} < 1")
            vwgt.append(w)
            tokens = tokens[ncon:]
        row = []
        for v in tokens:
            if not 1 <= v <= n:
                raise GraphFormatError(f"vertex {u + 1}: neighbor {v} out of range")
            if v == u + 1:
                raise GraphFormatError(f"vertex {u + 1}: self loop")
            row.append(v - 1)
        if len(set(row)) != len(row):
            raise GraphFormatError(f"vertex {u + 1}: duplicate neighbor")
        adj.append(row)

    arcs = sum(len(r) for r in adj)
    if arcs not in (nedges, 2 * nedges):
        raise GraphFormatError(
            f"header states {nedges} edges but file holds {arcs} arcs"
        )
    arcset = {(u, v) for u, row in enumerate(adj) for v in row}
    for u, v in arcset:
        if (v, u) not in arcset:
            raise GraphFormatError(
                f"asymmetric adjacency: {u + 1} lists {v + 1} but not conversely"
            )
    return Graph(n, adj, vwgt=vwgt if has_vwgt else None)


def write_chaco(g: Graph):
    weighted = any(w != 1 for w in g.vwgt)
    out = [f"{g.n} {g.nedges} 10" if weighted else f"{g.n} {g.nedges}"]
    for u in range(g.n):
        row = sorted(v + 1 for v in g.adj[u])
        if weighted:
            row = [g.vwgt[u]] + row
        out.append(" ".join(str(x) for x in row))
    return "\n".join(out) + "\n"


def read_matrix_market(text):
    """Parse a Matrix Market coordinate file as a symmetric pattern.

    Values are ignored, diagonal entries dropped, and general patterns
    symmetrized by union. Rejects non-square matrices.
    """
    lines = text.splitlines()
    if not lines:
        raise GraphFormatError("empty matrix file")
    head = lines[0].lower().split()
    if len(head) >= 3 and head[0].startswith("%%matrixmarket"):
        if head[1] != "matrix" or head[2] != "coordinate":
            raise GraphFormatError("only coordinate matrices are supported")
    data = list(_data_lines(text))
    dims = data[0].split()
    if len(dims) != 3:
        raise GraphFormatError(f"bad size line: {data[0]!r}")
    rows, cols, nnz = (int(t) for t in dims)
    if rows != cols:
        raise GraphFormatError(f"matrix is {rows}x{cols}, not square")
    if len(data) - 1 != nnz:
        raise GraphFormatError(f"size line states {nnz} entries, found {len(data) - 1}")
    arcs = set()
    for entry in data[1:]:
        tok = entry.split()
        i, j = int(tok[0]), int(tok[1])
        if not (1 <= i <= rows and 1 <= j <= cols):
            raise GraphFormatError(f"entry ({i},{j}) out of range")
        if i == j:
            continue
        arcs.add((i - 1, j - 1))
        arcs.add((j - 1, i - 1))
    adj = [[] for _ in range(rows)]
    for u, v in sorted(arcs):
        adj[u].append(v)
    return Graph(rows, adj)


def read_graph_file(path):
    """Read a graph file, picking the parser from the extension."""
    with open(path) as fh:
        text = fh.read()
    if str(path).endswith(".mtx") or text.lstrip()[:2] == "%%":
        return read_matrix_market(text)
    return read_chaco(text)


def write_perm(invperm, meta=None):
    """Serialize an inverse permutation, one index per line.

    Line k holds the original index of the vertex eliminated k-th. ``meta``
    key/values (seed, process count, strategy) go into header comments.
    """
    out = []
    for key, value in (meta or {}).items():
        out.append(f"# {key}: {value}")
    out.extend(str(v) for v in invperm)
    return "\n".join(out) + "\n"


def read_perm(text):
    values = []
    for line in _data_lines(text):
        try:
            values.append(int(line))
        except ValueError as exc:
            raise GraphFormatError(f"bad permutation line: {line!r}") from exc
    seen = set(values)
    if len(seen) != len(values) or seen != set(range(len(values))):
        raise GraphFormatError("permutation is not a bijection on 0..n-1")
    return values


# -- generators --------------------------------------------------------------


def gen_grid2d(k):
    """k x k grid: k^2 vertices, 2k(k-1) edges."""
    edges = []
    for i in range(k):
        for j in range(k):
            u = i * k + j
            if j + 1 < k:
                edges.append((u, u + 1))
            if i + 1 < k:
                edges.append((u, u + k))
    return Graph.from_edges(k * k, edges)


def gen_grid3d(k):
    """k x k x k grid: k^3 vertices, 3k^2(k-1) edges."""
    def vid(i, j, l):
        return (i * k + j) * k + l

    edges = []
    for i in range(k):
        for j in range(k):
            for l in range(k):
                if l + 1 < k:
                    edges.append((vid(i, j, l), vid(i, j, l + 1)))
                if j + 1 < k:
                    edges.append((vid(i, j, l), vid(i, j + 1, l)))
                if i + 1 < k:
                    edges.append((vid(i, j, l), vid(i + 1, j, l)))
    return Graph.from_edges(k ** 3, edges)


def gen_path(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def gen_star(n):
    """n vertices: center 0 joined to the n-1 leaves."""
    return Graph.from_edges(n, [(0, i) for i in range(1, n)])


def gen_random(n, m, seed):
    """m distinct edges drawn uniformly from the n(n-1)/2 pairs."""
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    if m > len(pairs):
        raise GraphFormatError(f"cannot place {m} edges on {n} vertices")
    rng = random.Random(seed)
    return Graph.from_edges(n, rng.sample(pairs, m))


def generate(kind, args):
    """Dispatch for the ``gen`` CLI subcommand."""
    try:
        if kind == "grid2d":
            return gen_grid2d(int(args[0]))
        if kind == "grid3d":
            return gen_grid3d(int(args[0]))
        if kind == "path":
            return gen_path(int(args[0]))
        if kind == "star":
            return gen_star(int(args[0]))
        if kind == "random":
            return gen_random(int(args[0]), int(args[1]), int(args[2]))
    except (IndexError, ValueError) as exc:
        raise GraphFormatError(f"bad arguments for generator {kind!r}: {args}") from exc
    raise GraphFormatError(f"unknown generator kind {kind!r}")
