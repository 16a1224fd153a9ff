"""Command-line interface.

Subcommands: gen-data, build-index, query, bench, compare-oracle, and
bench-kernels.  Exit codes: 0 on success, 1 for usage errors (bad flags,
unknown attributes, malformed config), 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from kndn import bench, datagen, kernels, model, oracle, rtree, solver


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> Parser:
    parser = Parser(prog="kndn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("gen-data", help="generate a Zipf dataset as CSV plus schema sidecar")
    p.add_argument("--n", type=int, default=50000)
    p.add_argument("--dims", type=int, default=6)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--values", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--schema-out", default=None, help="sidecar path (default: <out>.schema)")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("build-index", help="bulk load an R-tree and persist it")
    p.add_argument("dataset")
    p.add_argument("--schema", default=None)
    p.add_argument("--dims", default=None, help="comma-separated attribute names (default: all numeric)")
    p.add_argument("--branching", type=int, default=64)
    p.add_argument("--fill", type=float, default=0.7)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("query", help="run one diverse nearest-neighbor query")
    p.add_argument("dataset")
    p.add_argument("--schema", default=None)
    p.add_argument("--index", default=None, help="persisted index (default: build in memory)")
    p.add_argument("--where", action="append", default=[], metavar="ATTR=VALUE",
                   help="point predicate in raw units; repeatable")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--mindiv", type=float, default=0.0)
    p.add_argument("--diversity-attrs", default=None, metavar="A,B,...",
                   help="default: the point attributes")
    p.add_argument("--decay", type=float, default=0.1)
    p.add_argument("--metric", choices=model.METRICS, default="euclidean")
    p.add_argument("--aggregate", choices=model.AGGREGATES, default="harmonic")
    p.add_argument("--algorithm", choices=("buffered", "direct"), default="buffered")
    p.add_argument("--no-prune", action="store_true")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="run the experiment harness")
    p.add_argument("--config", default=None)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("compare-oracle", help="score the solver against the exhaustive optimum")
    p.add_argument("--data", default=None, help="CSV dataset (default: generated Zipf)")
    p.add_argument("--schema", default=None)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--dims", type=int, default=3)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--queries", type=int, default=50)
    p.add_argument("--workload-seed", type=int, default=1)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--mindiv", default="0.05,0.1,0.2")
    p.add_argument("--n-limit", type=int, default=400)
    p.add_argument("--k-limit", type=int, default=5)
    p.set_defaults(func=cmd_compare_oracle)

    p = sub.add_parser("bench-kernels", help="time the compiled vs pure-Python kernels")
    p.add_argument("--repeat", type=int, default=20000)
    p.add_argument("--macro", action="store_true", help="also time full queries per backend")
    p.set_defaults(func=cmd_bench_kernels)

    return parser


def cmd_gen_data(args) -> int:
    dataset = datagen.gen_zipf(args.n, args.dims, args.theta, args.values, args.seed)
    schema_out = args.schema_out or args.out + ".schema"
    model.save_csv(dataset, args.out, schema_out)
    print(f"wrote {dataset.n} rows x {dataset.dim} dims to {args.out} (schema: {schema_out})")
    return 0


def _load_dataset(path, schema):
    return model.load_csv(path, schema)


def cmd_build_index(args) -> int:
    dataset = _load_dataset(args.dataset, args.schema)
    dims = [d.strip() for d in args.dims.split(",")] if args.dims else None
    tree = rtree.build(dataset, dims=dims, config=rtree.RTreeConfig(args.branching, args.fill))
    rtree.save(tree, args.out)
    print(f"wrote index over dims {tree.dims} ({tree.n_nodes} nodes, height {tree.height()}) to {args.out}")
    return 0


def _parse_where(pairs) -> list[tuple[str, str]]:
    out = []
    for pair in pairs:
        if "=" not in pair:
            raise UsageError(f"--where needs ATTR=VALUE, got {pair!r}")
        name, value = pair.split("=", 1)
        out.append((name.strip(), value.strip()))
    if not out:
        raise UsageError("at least one --where ATTR=VALUE is required")
    return out


def cmd_query(args) -> int:
    dataset = _load_dataset(args.dataset, args.schema)
    where = _parse_where(args.where)
    point = []
    for name, raw in where:
        col = dataset.column(name)
        try:
            value = dataset.normalize_value(col, float(raw))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        point.append((name, value))
    diversity = (
        tuple(a.strip() for a in args.diversity_attrs.split(","))
        if args.diversity_attrs
        else tuple(name for name, _ in point)
    )
    query = model.Query(
        point=tuple(point), k=args.k, min_div=args.mindiv, diversity=diversity,
        decay=args.decay, metric=args.metric, aggregate=args.aggregate,
    )
    query.validate_for(dataset)
    if args.index:
        tree = rtree.load(args.index, dataset)
    else:
        tree = rtree.build(dataset, dims=[name for name, _ in point])
    run = solver.buffered_greedy if args.algorithm == "buffered" else solver.direct_greedy
    result = run(dataset, tree, query, prune=not args.no_prune)

    for answer in result.answers:
        cells = []
        for c, spec in enumerate(dataset.schema):
            raw = dataset.to_raw(c, answer.record.values[c])
            cells.append(f"{spec.name}={raw:.6g}" if spec.kind == model.NUMERIC else f"{spec.name}={raw}")
        flag = "diverse" if answer.diverse else "filler"
        print(f"id={answer.record.id} {' '.join(cells)} distance={answer.distance:.6f} [{flag}]")
    stats = result.stats
    print(
        f"score={result.score:.6f} tuples_read={stats.tuples_read} "
        f"nodes_expanded={stats.nodes_expanded} pqueue_peak={stats.pqueue_peak} "
        f"wall_time={stats.wall_time:.4f}s"
    )
    return 0


def cmd_bench(args) -> int:
    overrides = {}
    for pair in args.set:
        if "=" not in pair:
            raise UsageError(f"--set needs KEY=VALUE, got {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value.strip()
    try:
        cfg = bench.load_config(args.config, overrides)
    except bench.ConfigError as exc:
        raise UsageError(str(exc)) from None
    paths = bench.run_bench(cfg, progress=lambda family: print(f"running family: {family}"))
    for path in paths:
        print(f"wrote {path}")
    return 0


def cmd_compare_oracle(args) -> int:
    if args.data:
        dataset = _load_dataset(args.data, args.schema)
    else:
        dataset = datagen.gen_zipf(args.n, args.dims, args.theta, seed=args.seed)
    tree = rtree.build(dataset)
    attrs = [spec.name for spec in dataset.schema if spec.kind == model.NUMERIC]
    for min_div in (float(v) for v in args.mindiv.split(",")):
        queries = datagen.gen_workload(
            args.queries, attrs, args.workload_seed, k=args.k, min_div=min_div
        )
        rows = bench.compare_oracle(
            dataset, tree, queries, n_limit=args.n_limit, k_limit=args.k_limit
        )
        ratios = [r["ratio"] for r in rows]
        non_optimal = [r for r in rows if r["ratio"] < 1.0 - 1e-9]
        overlap = (
            sum(r["overlap"] for r in non_optimal) / len(non_optimal) if non_optimal else 1.0
        )
        print(
            f"min_div={min_div}: queries={len(rows)} avg_ratio={sum(ratios) / len(ratios):.4f} "
            f"worst_ratio={min(ratios):.4f} non_optimal={len(non_optimal)} "
            f"overlap_on_non_optimal={overlap:.4f}"
        )
    return 0


def cmd_bench_kernels(args) -> int:
    rows, unavailable = bench.bench_kernels(repeat=args.repeat)
    print(f"active backend: {kernels.BACKEND}")
    for name in unavailable:
        print(f"backend {name!r} unavailable (extension not built)")
    print(f"{'kernel':<20} {'backend':<10} {'ns/call':>12}")
    for label, backend, ns in rows:
        print(f"{label:<20} {backend:<10} {ns:>12.1f}")
    if args.macro:
        print("macro: buffered greedy, 20 queries on zipf 20000x4, k=10, min_div=0.1")
        for name, ms, _ids in bench.bench_query_backends():
            print(f"{'full_query':<20} {name:<10} {ms:>10.2f}ms")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (model.QueryError, bench.ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (model.DataFormatError, rtree.IndexError_, oracle.OracleLimitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
