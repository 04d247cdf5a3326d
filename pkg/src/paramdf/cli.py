"""Command-line entry point: ``pdf train|ablate|verify|inspect|bench``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .experiments import (
    ConfigError, cmd_ablate, cmd_bench, cmd_train, format_bench, inspect_graphs, load_experiment,
    load_graphs_file, ordering_report, parse_family_arg,
)
from .verify import run_all

log = logging.getLogger("paramdf")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _train(args) -> int:
    exp = load_experiment(args.config)
    summary = cmd_train(exp)["summary"]
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _ablate(args) -> int:
    exp = load_experiment(args.config)
    rows = cmd_ablate(exp)
    for r in rows:
        print(f"{r['name']:<28} valid median {r['valid_median']:.4g}  test median {r['test_median']:.4g}")
    for better, worse, a, b, ok in ordering_report(rows, exp.dataset.task):
        level = logging.INFO if ok else logging.WARNING
        log.log(level, "ordering %s >= %s: %.4g vs %.4g %s", better, worse, a, b, "holds" if ok else "VIOLATED")
    return EXIT_OK


def _verify(args) -> int:
    report = run_all(seed=args.seed, trials=args.trials, tol_scale=args.tol_scale)
    sys.stdout.write(report.format())
    return EXIT_OK if report.passed else EXIT_FAIL


def _inspect(args) -> int:
    graphs = load_graphs_file(args.graph)
    families = [parse_family_arg(f) for f in (args.family or ["laplacian"])]
    coeffs = None
    if args.filter is not None:
        try:
            coeffs = [float(c) for c in args.filter.split(",")]
        except ValueError as exc:
            raise ConfigError("--filter", f"expected comma-separated numbers: {exc}") from exc
    print(json.dumps(inspect_graphs(graphs, families, coeffs, args.basis), indent=2))
    return EXIT_OK


def _bench(args) -> int:
    exp = load_experiment(args.config)
    rows = cmd_bench(exp, args.epochs)
    sys.stdout.write(format_bench(rows, args.epochs or exp.raw.get("bench", {}).get("epochs", 5)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdf", description="Parameterized graph operator learning toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model from a JSON experiment config")
    p.add_argument("config")
    p.set_defaults(func=_train)

    p = sub.add_parser("ablate", help="run the variant grid and write ablation.csv")
    p.add_argument("config")
    p.set_defaults(func=_ablate)

    p = sub.add_parser("verify", help="run the randomized identity checks")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--tol-scale", type=float, default=1.0, help="multiply every tolerance (0 forces failure)")
    p.set_defaults(func=_verify)

    p = sub.add_parser("inspect", help="spectral report for graphs in a JSON file")
    p.add_argument("graph")
    p.add_argument("--family", action="append",
                   help="preset name, JSON [[eps,k],...] or eps:k,eps:k (repeatable)")
    p.add_argument("--filter", help="polynomial coefficients c0,c1,... in increasing degree")
    p.add_argument("--basis", default="laplacian", choices=("laplacian", "norm_laplacian_selfloop"))
    p.set_defaults(func=_inspect)

    p = sub.add_parser("bench", help="time training and evaluation epochs")
    p.add_argument("config")
    p.add_argument("--epochs", type=int, default=None)
    p.set_defaults(func=_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
