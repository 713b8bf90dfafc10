"""Fill-reducing nested dissection orderings of symmetric sparse matrices.

The pipeline runs on a deterministic simulator of message-passing
processes: multilevel coarsening by probabilistic matching, band-refined
vertex separators, recursive dissection with minimum-degree tails, and
symbolic Cholesky evaluation of the result.
"""

from .errors import GraphFormatError, InvariantError
from .estimator import NestedDissectionOrdering, graph_from_matrix
from .evaluate import ElimStats, fill_ratio, symbolic_factorize
from .graph import Graph
from .ordering import OrderResult, invert, order_graph
from .params import OrderParams
from .procsim import Comm, Message, run_group

__version__ = "0.1.0"

__all__ = [
    "Comm",
    "ElimStats",
    "Graph",
    "GraphFormatError",
    "InvariantError",
    "Message",
    "NestedDissectionOrdering",
    "OrderParams",
    "OrderResult",
    "fill_ratio",
    "graph_from_matrix",
    "invert",
    "order_graph",
    "run_group",
    "symbolic_factorize",
    "__version__",
]
