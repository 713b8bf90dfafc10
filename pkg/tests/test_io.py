import pytest

from ndorder.errors import GraphFormatError
from ndorder.io import (
    gen_grid2d,
    gen_grid3d,
    gen_path,
    gen_random,
    gen_star,
    generate,
    read_chaco,
    read_matrix_market,
    read_perm,
    write_chaco,
    write_perm,
)


def test_chaco_path3():
    g = read_chaco("3 2\n2\n1 3\n2\n")
    assert g.n == 3
    assert g.adj == [[1], [0, 2], [1]]
    assert g.vwgt == [1, 1, 1]


def test_chaco_vertex_weights():
    g = read_chaco("2 1 10\n3 2\n3 1\n")
    assert g.n == 2
    assert g.vwgt == [3, 3]
    assert g.adj == [[1], [0]]


def test_chaco_asymmetric_rejected():
    with pytest.raises(GraphFormatError, match="asymmetric"):
        read_chaco("2 1\n2\n\n")


def test_chaco_arc_convention_tolerated():
    # header may count undirected edges or arcs
    assert read_chaco("3 2\n2\n1 3\n2\n").nedges == 2
    assert read_chaco("3 4\n2\n1 3\n2\n").nedges == 2
    with pytest.raises(GraphFormatError, match="header states"):
        read_chaco("3 3\n2\n1 3\n2\n")


def test_chaco_neighbor_out_of_range():
    with pytest.raises(GraphFormatError, match="out of range"):
        read_chaco("2 1\n3\n1\n")


def test_chaco_edge_weights_unsupported():
    with pytest.raises(GraphFormatError, match="unsupported format"):
        read_chaco("2 1 1\n2 5\n1 5\n")


def test_chaco_comments_and_roundtrip():
    g = gen_random(12, 20, seed=1)
    text = "% a comment\n" + write_chaco(g)
    back = read_chaco(text)
    assert back.adj == [sorted(row) for row in g.adj]
    weighted = gen_path(3)
    weighted.vwgt[1] = 7
    back = read_chaco(write_chaco(weighted))
    assert back.vwgt == [1, 7, 1]
    assert back.adj == weighted.adj


def test_matrix_market_path3():
    text = """%%MatrixMarket matrix coordinate pattern symmetric
3 3 2
2 1
3 2
"""
    g = read_matrix_market(text)
    assert g.adj == [[1], [0, 2], [1]]


def test_matrix_market_diagonal_dropped():
    text = "%%MatrixMarket matrix coordinate real general\n3 3 1\n1 1 4.0\n"
    g = read_matrix_market(text)
    assert g.n == 3
    assert g.nedges == 0


def test_matrix_market_general_symmetrized():
    text = "%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 2\n"
    g = read_matrix_market(text)
    assert g.adj == [[1], [0]]


def test_matrix_market_rejects_non_square():
    with pytest.raises(GraphFormatError, match="square"):
        read_matrix_market("%%MatrixMarket matrix coordinate pattern general\n2 3 1\n1 2\n")


def test_generators_counts():
    assert gen_grid2d(3).n == 9 and gen_grid2d(3).nedges == 12
    assert gen_path(5).n == 5 and gen_path(5).nedges == 4
    assert gen_grid3d(4).n == 64 and gen_grid3d(4).nedges == 144
    assert gen_star(4).n == 4 and gen_star(4).nedges == 3
    g = gen_random(10, 15, seed=3)
    assert g.n == 10 and g.nedges == 15
    assert gen_random(10, 15, seed=3).adj == g.adj   # deterministic
    assert generate("grid2d", ["3"]).nedges == 12


def test_gen_random_too_many_edges():
    with pytest.raises(GraphFormatError):
        gen_random(3, 4, seed=0)


def test_perm_identity_serialization():
    assert write_perm([0, 1, 2]) == "0\n1\n2\n"


def test_perm_roundtrip_with_header():
    text = write_perm([2, 0, 1], meta={"seed": 7, "procs": 2})
    assert text.startswith("# seed: 7\n# procs: 2\n")
    assert read_perm(text) == [2, 0, 1]


def test_perm_rejects_duplicates_and_gaps():
    with pytest.raises(GraphFormatError):
        read_perm("0\n0\n1\n")
    with pytest.raises(GraphFormatError):
        read_perm("0\n2\n")
    with pytest.raises(GraphFormatError):
        read_perm("0\nx\n")
