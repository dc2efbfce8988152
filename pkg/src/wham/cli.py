"""Command-line entry point.

Exit codes: 0 on success, 2 on configuration errors, 3 on parse errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import serialize
from .bench import harness
from .bench.encode import WEIGHT_SCHEMES, lsh_encode
from .errors import ConfigurationError, ParseError, WhamError
from .index import FullTable, MultiIndexTables, bucket_sharing_stats, build_full_table, build_multi_index, \
    build_single_table, choose_m

EXIT_CONFIG = 2
EXIT_PARSE = 3


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _m_value(text: str) -> int | None:
    if text == "auto":
        return None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--m takes an integer or 'auto', got {text!r}") from None


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", default="synthetic", help="path to an .fvecs/.bvecs file, or 'synthetic'")
    p.add_argument("--kind", choices=("fvecs", "bvecs"), default="fvecs")
    p.add_argument("--n", type=int, default=100_000, help="number of base vectors")
    p.add_argument("--dim", type=int, default=128, help="dimension of synthetic vectors")
    p.add_argument("--bits", type=int, default=64)
    p.add_argument("--m", type=_m_value, default=None, metavar="INT|auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clusters", type=int, default=1000, help="synthetic mixture components (0: isotropic)")
    p.add_argument("--spread", type=float, default=1.5, help="synthetic cluster-centre scale")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wham", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="time search methods against the linear scan")
    _add_data_args(bench)
    bench.add_argument("--queries", default=None, help="query file (default: hold out the dataset tail)")
    bench.add_argument("--n-queries", type=int, default=100)
    bench.add_argument("--k", type=_int_list, default=[1, 10, 100])
    bench.add_argument("--methods", default="linear_scan,fswbc_multi",
                       help=f"comma-separated subset of {','.join(harness.METHODS)}")
    bench.add_argument("--weights", choices=WEIGHT_SCHEMES, default="magnitude")
    bench.add_argument("--out", default=None, help="CSV output path")

    index = sub.add_parser("index", help="build or inspect serialized indexes")
    isub = index.add_subparsers(dest="action", required=True)
    build = isub.add_parser("build", help="encode a dataset and write a WHIX index")
    _add_data_args(build)
    build.add_argument("--layout", choices=("full", "multi", "single"), default="multi")
    build.add_argument("--out", required=True)
    info = isub.add_parser("info", help="summarize a WHIX index file")
    info.add_argument("path")
    return parser


def _cmd_bench(args) -> int:
    cfg = harness.BenchConfig(
        dataset=args.dataset, kind=args.kind, queries=args.queries, n=args.n, n_queries=args.n_queries,
        dim=args.dim, bits=args.bits, m=args.m, ks=args.k, methods=[x for x in args.methods.split(",") if x],
        weights=args.weights, seed=args.seed, clusters=args.clusters, spread=args.spread,
    )
    reports = harness.run_benchmark(cfg)
    print(harness.format_table(reports))
    if args.out:
        harness.write_csv(reports, args.out)
    return 0


def _cmd_index_build(args) -> int:
    cfg = harness.BenchConfig(dataset=args.dataset, kind=args.kind, n=args.n, dim=args.dim, bits=args.bits,
                              m=args.m, seed=args.seed, clusters=args.clusters, spread=args.spread,
                              n_queries=1, methods=["linear_scan"])
    cfg.validate()
    base, _ = harness.load_vectors(cfg)
    codes = lsh_encode(base, args.bits, args.seed).codes
    if args.layout == "full":
        index = build_full_table(codes)
    else:
        m = args.m or choose_m(args.bits, len(codes))
        index = (build_multi_index if args.layout == "multi" else build_single_table)(codes, m)
    size = serialize.save(index, args.out)
    print(f"wrote {args.out}: {index!r}, {size} bytes")
    return 0


def _cmd_index_info(args) -> int:
    index = serialize.load(args.path)
    print(f"layout: {type(index).__name__}")
    print(f"b={index.b} m={index.m} s={index.s} n={index.n}")
    print(f"storage_bytes: {index.storage_bytes()}")
    if isinstance(index, FullTable):
        print(f"non-empty buckets: {len(index.nonempty())}")
    elif isinstance(index, MultiIndexTables):
        print(f"non-empty buckets per table: {[len(t) for t in index.tables]}")
        stats = bucket_sharing_stats(index.codes, index.m)
        print(f"keys in one table: {stats.ratio_one:.1f}%  shared: {stats.ratio_shared:.1f}%")
    else:
        print(f"distinct keys: {len(index.table)}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "bench":
            return _cmd_bench(args)
        if args.action == "build":
            return _cmd_index_build(args)
        return _cmd_index_info(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ConfigurationError, WhamError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
