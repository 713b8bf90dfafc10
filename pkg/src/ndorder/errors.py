class GraphFormatError(ValueError):
    """Malformed or unsupported graph/permutation input."""


class InvariantError(RuntimeError):
    """An internal structural invariant was violated."""
