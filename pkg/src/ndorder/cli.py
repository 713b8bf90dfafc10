"""Command line front end.

Subcommands: ``order`` computes a fill-reducing permutation, ``eval``
scores an existing one, ``check`` validates a graph file, ``gen`` writes
synthetic test graphs. Exit codes: 0 success, 1 malformed input,
2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import sys

from .errors import GraphFormatError, InvariantError
from .evaluate import fill_ratio, symbolic_factorize
from .io import generate, read_graph_file, read_perm, write_chaco, write_perm
from .ordering import order_graph
from .params import OrderParams
from .procsim import SCHEDULERS


def _add_strategy_flags(p: argparse.ArgumentParser):
    d = OrderParams()
    p.add_argument("--fold-min", type=int, default=d.fold_min, metavar="N",
                   help="fold-dup once avg vertices/process drops below N "
                        f"(default {d.fold_min})")
    p.add_argument("--coarsest-size", type=int, default=d.coarsest_size,
                   metavar="N", help=f"coarsening target size (default {d.coarsest_size})")
    p.add_argument("--match-passes", type=int, default=d.match_passes, metavar="N",
                   help=f"max matching rounds per level (default {d.match_passes})")
    p.add_argument("--ratio-max", type=float, default=d.ratio_max, metavar="R",
                   help=f"stop coarsening above this shrink ratio (default {d.ratio_max})")
    p.add_argument("--band-width", type=int, default=d.band_width, metavar="W",
                   help="hops kept around the separator during refinement; "
                        f"0 refines the whole graph (default {d.band_width})")
    p.add_argument("--band-max", type=int, default=d.band_max, metavar="N",
                   help=f"largest band replicated everywhere (default {d.band_max})")
    p.add_argument("--balance-tol", type=float, default=d.balance_tol, metavar="T",
                   help=f"part imbalance tolerance (default {d.balance_tol})")
    p.add_argument("--fm-passes", type=int, default=d.fm_passes, metavar="N",
                   help=f"refinement passes per level (default {d.fm_passes})")
    p.add_argument("--fm-backtrack", type=int, default=d.fm_backtrack, metavar="N",
                   help=f"non-improving moves tolerated (default {d.fm_backtrack})")
    p.add_argument("--tries", type=int, default=d.tries, metavar="N",
                   help=f"initial separator attempts (default {d.tries})")
    p.add_argument("--perturb-moves", type=int, default=d.perturb_moves, metavar="N",
                   help=f"start perturbation strength (default {d.perturb_moves})")
    p.add_argument("--nd-cutoff", type=int, default=d.nd_cutoff, metavar="N",
                   help=f"switch to minimum degree below N vertices (default {d.nd_cutoff})")
    p.add_argument("--validate", action="store_true",
                   help="run internal invariant checks while ordering")


def _params_of(args) -> OrderParams:
    return OrderParams(
        fold_min=args.fold_min, coarsest_size=args.coarsest_size,
        match_passes=args.match_passes, ratio_max=args.ratio_max,
        band_width=args.band_width, band_max=args.band_max,
        balance_tol=args.balance_tol, fm_passes=args.fm_passes,
        fm_backtrack=args.fm_backtrack, tries=args.tries,
        perturb_moves=args.perturb_moves, nd_cutoff=args.nd_cutoff,
        validate=args.validate,
    )


def _strategy_string(params: OrderParams) -> str:
    d = OrderParams()
    shown = []
    for name in ("fold_min", "coarsest_size", "match_passes", "ratio_max",
                 "band_width", "band_max", "balance_tol", "fm_passes",
                 "fm_backtrack", "tries", "perturb_moves", "nd_cutoff"):
        value = getattr(params, name)
        mark = "" if value == getattr(d, name) else "*"
        shown.append(f"{name}={value}{mark}")
    return " ".join(shown)


def _print_metrics(graph, invperm, out):
    stats = symbolic_factorize(graph, invperm)
    ratio = fill_ratio(stats, graph)
    print(f"vertices: {graph.n}  edges: {graph.nedges}", file=out)
    print(f"factor nonzeros (NNZ): {stats.nnz}", file=out)
    print(f"operation count (OPC): {stats.opc}", file=out)
    print(f"fill ratio: {ratio:.6f}", file=out)
    print(f"NNZ={stats.nnz} OPC={stats.opc} FILL={ratio:.6f}", file=out)


def cmd_order(args) -> int:
    graph = read_graph_file(args.input).check()
    params = _params_of(args)
    result = order_graph(graph, procs=args.procs, seed=args.seed,
                         params=params, scheduler=args.scheduler)
    meta = {
        "graph": args.input,
        "seed": args.seed,
        "procs": args.procs,
        "strategy": _strategy_string(params),
    }
    text = write_perm(result.invperm, meta)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.metrics:
        _print_metrics(graph, result.invperm, sys.stdout)
    return 0


def cmd_eval(args) -> int:
    graph = read_graph_file(args.input).check()
    with open(args.perm) as fh:
        invperm = read_perm(fh.read())
    if len(invperm) != graph.n:
        raise GraphFormatError(
            f"permutation orders {len(invperm)} vertices, graph has {graph.n}")
    _print_metrics(graph, invperm, sys.stdout)
    return 0


def cmd_check(args) -> int:
    graph = read_graph_file(args.input).check()
    weighted = any(w != 1 for w in graph.vwgt)
    print(f"{args.input}: ok, {graph.n} vertices, {graph.nedges} edges"
          + (", vertex weights" if weighted else ""))
    return 0


def cmd_gen(args) -> int:
    graph = generate(args.kind, args.args)
    text = write_chaco(graph)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ndorder",
        description="Fill-reducing nested dissection orderings of symmetric "
                    "sparse matrices and graphs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("order", help="compute an ordering")
    p.add_argument("input", help="graph file (.graph Chaco/METIS or .mtx)")
    p.add_argument("--procs", type=int, default=1, metavar="P",
                   help="logical processes (any P >= 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scheduler", choices=SCHEDULERS, default="threads",
                   help="how ranks are scheduled; the result is identical")
    p.add_argument("-o", "--output", metavar="FILE",
                   help="permutation file (default: stdout)")
    p.add_argument("--metrics", action="store_true",
                   help="also print NNZ/OPC/fill of the computed ordering")
    _add_strategy_flags(p)
    p.set_defaults(func=cmd_order)

    p = sub.add_parser("eval", help="score an existing ordering")
    p.add_argument("input")
    p.add_argument("--perm", required=True, metavar="FILE")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("check", help="validate a graph file")
    p.add_argument("input")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("gen", help="write a synthetic test graph")
    p.add_argument("kind", choices=["grid2d", "grid3d", "path", "star", "random"])
    p.add_argument("args", nargs="*",
                   help="grid2d K | grid3d K | path N | star N | random N M SEED")
    p.add_argument("-o", "--output", metavar="FILE")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GraphFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InvariantError as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
