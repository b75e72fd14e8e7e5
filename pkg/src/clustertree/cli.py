"""Command-line driver: cluster, evaluate, extract, gen, serve.

Each subcommand is a thin wrapper over the library; all randomness flows
from explicit ``--seed`` flags (default 0) so identical invocations produce
identical tree and assignment files.  Reports are key/value lines on
stdout.  Exit codes: 0 on success, 2 on usage errors, 1 otherwise (with a
diagnostic on stderr).
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .dataio import (
    attach_points,
    deserialize_tree,
    load_assignment,
    load_dataset,
    order_stream,
    read_point_names,
    save_assignment,
    save_dataset,
    serialize_tree,
)
from .extraction import FlatClustering, extract_flat
from .metrics import (
    EvalReport,
    GroundTruth,
    dendrogram_purity_exact,
    dendrogram_purity_mc,
    generate_separable,
    pairwise_f1,
)
from .rotation import insert, tree_balance
from .tree import ClusterTree, ModeConfig

__all__ = ["main"]


def _print_report(pairs) -> None:
    for key, value in pairs:
        if isinstance(value, float):
            value = f"{value:.6f}"
        print(f"{key}\t{value}")


def _order_kind(flag: str) -> str:
    return "round_robin" if flag == "roundrobin" else flag


def cmd_cluster(args) -> int:
    dataset = load_dataset(args.input)
    stream = order_stream(dataset, _order_kind(args.order), seed=args.seed)
    config = ModeConfig(
        masking_check=args.mode,
        rotations=args.rotations,
        search=args.search,
        beam_width=args.beam_width,
        collapse_bound=args.collapse,
    )
    tree = ClusterTree(config)
    stats_rows = []
    depth_stride = max(1, len(stream) // 256)
    started = time.perf_counter()
    for i, point in enumerate(stream):
        t0 = time.perf_counter()
        insert(tree, point)
        elapsed = time.perf_counter() - t0
        if args.stats:
            depth = tree.max_depth() if (i + 1) % depth_stride == 0 else ""
            stats_rows.append(f"{i}\t{elapsed!r}\t{depth}")
    seconds = time.perf_counter() - started

    names = {p.id: dataset.external_id(p.id) for p in dataset.points}
    Path(args.output).write_text(serialize_tree(tree, names), encoding="utf-8")
    if args.stats:
        Path(args.stats).write_text(
            "insert\tseconds\tmax_depth\n" + "\n".join(stats_rows) + "\n", encoding="utf-8"
        )
    _print_report(
        [
            ("n", tree.num_points),
            ("dim", tree.dim),
            ("leaves", tree.num_leaves),
            ("max_depth", tree.max_depth()),
            ("balance", tree_balance(tree)),
            ("seconds", seconds),
        ]
    )
    return 0


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    text = Path(args.tree).read_text(encoding="utf-8")
    tree = deserialize_tree(text)
    dataset = load_dataset(args.input)
    attach_points(tree, dataset.points)
    gt = GroundTruth.from_dataset(dataset)
    if args.dp == "mc":
        dp = dendrogram_purity_mc(tree, gt, m=args.mc_samples, seed=args.seed)
    else:
        dp = dendrogram_purity_exact(tree, gt)

    report = EvalReport(
        dendrogram_purity=dp,
        tree_balance=tree_balance(tree),
        max_depth=tree.max_depth(),
        n=tree.num_points,
    )
    if args.flat:
        ext_assignment = load_assignment(args.flat)
        by_name = {dataset.external_id(p.id): p.id for p in dataset.points}
        try:
            assignment = {by_name[ext]: cid for ext, cid in ext_assignment.items()}
        except KeyError as exc:
            raise ValueError(f"assignment references unknown point id {exc}") from None
        labeled = {pid: cid for pid, cid in assignment.items() if pid in gt.assignment}
        pred = FlatClustering(labeled, len(set(labeled.values())))
        report.precision, report.recall, report.f1 = pairwise_f1(pred, gt)
    report.seconds = time.perf_counter() - started

    lines = [("dp", report.dendrogram_purity)]
    if report.f1 is not None:
        lines += [("precision", report.precision), ("recall", report.recall), ("f1", report.f1)]
    lines += [
        ("balance", report.tree_balance),
        ("max_depth", report.max_depth),
        ("n", report.n),
        ("seconds", report.seconds),
    ]
    _print_report(lines)
    return 0


def cmd_extract(args) -> int:
    text = Path(args.tree).read_text(encoding="utf-8")
    tree = deserialize_tree(text)
    flat = extract_flat(tree, args.k)
    save_assignment(flat.assignment, args.output, names=read_point_names(text))
    _print_report([("k", flat.k), ("n", len(flat.assignment))])
    return 0


def cmd_gen(args) -> int:
    dataset, _ = generate_separable(
        k=args.k, n_per_cluster=args.n, d=args.d, margin=args.margin, seed=args.seed
    )
    save_dataset(dataset, args.output)
    _print_report([("n", len(dataset.points)), ("k", args.k), ("dim", args.d)])
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clustertree", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="build a cluster tree from a dataset TSV")
    p.add_argument("--input", required=True, help="dataset TSV path")
    p.add_argument("--order", choices=["given", "random", "sorted", "roundrobin"], default="given")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["exact", "approx"], default="approx",
                   help="masking-check strategy")
    p.add_argument("--rotations", choices=["none", "masking", "full"], default="full")
    p.add_argument("--search", choices=["astar", "beam"], default="astar")
    p.add_argument("--beam-width", type=int, default=5)
    p.add_argument("--collapse", type=int, default=None, metavar="L",
                   help="enable collapsed mode with at most L leaves")
    p.add_argument("--output", required=True, help="tree document path")
    p.add_argument("--stats", default=None, help="write per-insert latency/depth TSV here")
    p.set_defaults(handler=cmd_cluster)

    p = sub.add_parser("evaluate", help="score a tree against its dataset's labels")
    p.add_argument("--tree", required=True)
    p.add_argument("--input", required=True, help="dataset TSV the tree was built from")
    p.add_argument("--dp", choices=["exact", "mc"], default="exact")
    p.add_argument("--mc-samples", type=int, default=50000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--flat", default=None, help="assignment TSV to score with pairwise F1")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("extract", help="extract a K-way flat clustering from a tree")
    p.add_argument("--tree", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--output", required=True, help="assignment TSV path")
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("gen", help="generate a separable synthetic dataset")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True, help="points per cluster")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--margin", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(handler=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.handler(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
