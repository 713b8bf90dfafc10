"""Strategy parameters shared across the ordering pipeline."""

from __future__ import annotations

from dataclasses import dataclass, replace

__all__ = ["OrderParams"]


@dataclass
class OrderParams:
    # coarsening
    fold_min: int = 100          # fold-dup once avg vertices/rank drops below
    coarsest_size: int = 120     # stop coarsening at this many vertices
    match_passes: int = 8        # max matching rounds per level
    ratio_max: float = 0.8       # stop if coarse/fine exceeds this
    # separator refinement
    band_width: int = 3          # hops kept around the separator; 0 = no band
    band_max: int = 100000       # largest band replicated on every rank
    balance_tol: float = 0.2
    fm_passes: int = 10
    fm_backtrack: int = 40       # consecutive non-improving moves allowed
    tries: int = 4               # initial separator attempts
    perturb_moves: int = 4       # separator vertices moved before rank>0 FM
    # nested dissection
    nd_cutoff: int = 120         # below this, order by minimum degree
    # self-checking (slower; raises InvariantError on violation)
    validate: bool = False

    def with_(self, **kw):
        return replace(self, **kw)
