"""Scikit-learn style front end for the ordering pipeline.

``NestedDissectionOrdering`` is a transformer: ``fit`` computes a
fill-reducing elimination order for the pattern of a square symmetric
matrix, ``transform`` applies it symmetrically (PAP^T). It composes with
the usual scikit-learn machinery (``get_params`` / ``set_params`` /
``fit_transform``).
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from sklearn.base import BaseEstimator, TransformerMixin

from .evaluate import fill_ratio, symbolic_factorize
from .graph import Graph
from .ordering import order_graph
from .params import OrderParams

__all__ = ["NestedDissectionOrdering", "graph_from_matrix"]


def graph_from_matrix(X) -> Graph:
    """Adjacency pattern of a square matrix as an undirected graph.

    Accepts scipy sparse matrices or dense arrays. The pattern is
    symmetrized by union and the diagonal is ignored.
    """
    if sparse.issparse(X):
        coo = X.tocoo()
        rows = coo.row.tolist()
        cols = coo.col.tolist()
        shape = X.shape
    else:
        arr = np.asarray(X)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2d matrix, got shape {arr.shape}")
        rows, cols = (ix.tolist() for ix in np.nonzero(arr))
        shape = arr.shape
    if shape[0] != shape[1]:
        raise ValueError(f"matrix must be square, got {shape[0]}x{shape[1]}")
    arcs = set()
    for i, j in zip(rows, cols):
        if i != j:
            arcs.add((i, j))
            arcs.add((j, i))
    adj = [[] for _ in range(shape[0])]
    for i, j in sorted(arcs):
        adj[i].append(j)
    return Graph(shape[0], adj)


class NestedDissectionOrdering(BaseEstimator, TransformerMixin):
    """Fill-reducing symmetric reordering by multilevel nested dissection.

    Parameters mirror the CLI strategy flags; see ``OrderParams`` for the
    defaults and meanings. ``procs`` runs the ordering on that many
    simulated processes, ``seed`` fixes all random choices.

    Attributes
    ----------
    permutation_ : ndarray
        Direct permutation: entry v is the elimination position of vertex v.
    inverse_permutation_ : ndarray
        Entry k is the vertex eliminated k-th.
    nnz_ : int
        Nonzeros of the Cholesky factor under this ordering, diagonal
        included.
    opc_ : int
        Cholesky operation count, the sum of squared column counts.
    fill_ratio_ : float
        nnz_ over the nonzeros of the input pattern.
    """

    def __init__(self, procs=1, seed=0, fold_min=100, coarsest_size=120,
                 match_passes=8, ratio_max=0.8, band_width=3, band_max=100000,
                 balance_tol=0.2, fm_passes=10, fm_backtrack=40, tries=4,
                 perturb_moves=4, nd_cutoff=120, scheduler="threads"):
        self.procs = procs
        self.seed = seed
        self.fold_min = fold_min
        self.coarsest_size = coarsest_size
        self.match_passes = match_passes
        self.ratio_max = ratio_max
        self.band_width = band_width
        self.band_max = band_max
        self.balance_tol = balance_tol
        self.fm_passes = fm_passes
        self.fm_backtrack = fm_backtrack
        self.tries = tries
        self.perturb_moves = perturb_moves
        self.nd_cutoff = nd_cutoff
        self.scheduler = scheduler

    def _order_params(self) -> OrderParams:
        return OrderParams(
            fold_min=self.fold_min, coarsest_size=self.coarsest_size,
            match_passes=self.match_passes, ratio_max=self.ratio_max,
            band_width=self.band_width, band_max=self.band_max,
            balance_tol=self.balance_tol, fm_passes=self.fm_passes,
            fm_backtrack=self.fm_backtrack, tries=self.tries,
            perturb_moves=self.perturb_moves, nd_cutoff=self.nd_cutoff,
        )

    def fit(self, X, y=None):
        graph = graph_from_matrix(X)
        result = order_graph(graph, procs=self.procs, seed=self.seed,
                             params=self._order_params(),
                             scheduler=self.scheduler)
        self.n_vertices_ = graph.n
        self.inverse_permutation_ = np.asarray(result.invperm, dtype=np.intp)
        self.permutation_ = np.asarray(result.perm, dtype=np.intp)
        stats = symbolic_factorize(graph, result.invperm)
        self.nnz_ = stats.nnz
        self.opc_ = stats.opc
        self.fill_ratio_ = fill_ratio(stats, graph)
        return self

    def transform(self, X):
        """Apply the fitted ordering symmetrically: row and column k of
        the result belong to the vertex eliminated k-th."""
        if not hasattr(self, "inverse_permutation_"):
            raise RuntimeError("this transformer is not fitted yet")
        p = self.inverse_permutation_
        if sparse.issparse(X):
            if X.shape != (len(p), len(p)):
                raise ValueError(f"expected a {len(p)}x{len(p)} matrix")
            return X.tocsr()[p][:, p]
        arr = np.asarray(X)
        if arr.shape != (len(p), len(p)):
            raise ValueError(f"expected a {len(p)}x{len(p)} matrix")
        return arr[np.ix_(p, p)]
