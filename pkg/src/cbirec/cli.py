"""Command-line entry point: ``cbirec <subcommand> [options]``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from cbirec.algorithms import ALGORITHMS
from cbirec.errors import ConfigError, DataError
from cbirec.experiment import (ExperimentConfig, GridRange, curve_export, derive_seed,
                               format_table, grid_search, run_experiment)
from cbirec.ingest import FORMATS, dataset_stats, load_links, save_split, split

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("cbirec")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _delimiter(text: str) -> str:
    return {"\\t": "\t", "tab": "\t", "comma": ","}.get(text, text)


def _lengths(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad list length {text!r}") from None


def _algs(text: str) -> tuple[str, ...]:
    tags = tuple(t.strip().upper() for t in text.split(",") if t.strip())
    for t in tags:
        if t not in ALGORITHMS:
            raise argparse.ArgumentTypeError(f"unknown algorithm {t!r}")
    return tags


def _common(p: argparse.ArgumentParser):
    p.add_argument("--dataset", required=True, help="rating file: user, object, rating[, timestamp]")
    p.add_argument("--format", choices=sorted(FORMATS),
                   help="preset delimiter/header (overrides --delimiter)")
    p.add_argument("--delimiter", type=_delimiter, default="\t", help=r"field delimiter (default \t)")
    p.add_argument("--header", action="store_true", help="skip the first line")
    p.add_argument("--threshold", type=float, default=3.0, help="minimum rating kept as a link")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out-dir", default="results")
    p.add_argument("-v", "--verbose", action="store_true")


def _experiment(p: argparse.ArgumentParser, alg_default: str | None):
    p.add_argument("--test-fraction", type=float, default=0.1)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--list-length", type=_lengths, default=(50,),
                   help="L, or a comma list such as 10,50,100")
    p.add_argument("--auc-samples", type=int, default=10**6)
    p.add_argument("--alg", type=_algs, default=alg_default,
                   required=alg_default is None, help="comma list of " + ",".join(ALGORITHMS))
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--grid-alpha", type=GridRange.parse, default=GridRange(0.0, 1.5, 0.01))
    p.add_argument("--grid-beta", type=GridRange.parse, default=GridRange(0.0, 1.5, 0.01))
    p.add_argument("--grid-theta", type=GridRange.parse, default=GridRange(-1.5, 0.5, 0.01))
    p.add_argument("--grid-mode", choices=("refine", "exhaustive"), default="refine")
    p.add_argument("--objective", choices=("auc", "precision"), default="auc")
    p.add_argument("--auc-mode", choices=("user", "link"), default="user",
                   help="AUC comparisons drawn per user (default) or per test link")
    p.add_argument("--user-scope", choices=("all", "test"), default="all",
                   help="users averaged in precision and intra-similarity")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cbirec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse, threshold and print dataset statistics")
    _common(p)

    p = sub.add_parser("split", help="write one train/test split as edge lists")
    _common(p)
    p.add_argument("--test-fraction", type=float, default=0.1)
    p.add_argument("--rep", type=int, default=0, help="repetition index for the derived seed")

    p = sub.add_parser("run", help="evaluate one algorithm over repeated splits")
    _common(p)
    _experiment(p, None)

    p = sub.add_parser("report", help="multi-algorithm results table")
    _common(p)
    _experiment(p, ",".join(ALGORITHMS))

    p = sub.add_parser("grid", help="UCBI (alpha, beta) or HNBI theta grid search")
    _common(p)
    _experiment(p, "UCBI")

    p = sub.add_parser("curve", help="precision-recall curve data per algorithm")
    _common(p)
    _experiment(p, ",".join(ALGORITHMS))
    p.add_argument("--max-length", type=int, help="cap on the L sweep")
    return parser


def _config(args) -> ExperimentConfig:
    return ExperimentConfig(
        dataset=args.dataset,
        format=args.format,
        delimiter=args.delimiter,
        has_header=args.header,
        threshold=args.threshold,
        test_fraction=args.test_fraction,
        reps=args.reps,
        list_lengths=args.list_length,
        auc_samples=args.auc_samples,
        seed=args.seed,
        algorithms=args.alg,
        alpha=args.alpha,
        beta=args.beta,
        theta=args.theta,
        grid_alpha=args.grid_alpha,
        grid_beta=args.grid_beta,
        grid_theta=args.grid_theta,
        grid_mode=args.grid_mode,
        objective=args.objective,
        auc_mode=args.auc_mode,
        user_scope=args.user_scope,
        curve_max_length=getattr(args, "max_length", None),
        out_dir=args.out_dir,
        workers=args.workers,
    ).validate()


def _read(args):
    delimiter, header = FORMATS[args.format] if args.format else (args.delimiter, args.header)
    return load_links(args.dataset, delimiter, header, args.threshold)


def cmd_ingest(args) -> int:
    interner, links = _read(args)
    s = dataset_stats(links, interner.num_users, interner.num_objects)
    print(f"users\t{s.num_users}\nobjects\t{s.num_objects}\nlinks\t{s.num_links}\n"
          f"sparsity\t{s.sparsity:.6g}")
    return EXIT_OK


def cmd_split(args) -> int:
    if not 0.0 < args.test_fraction < 1.0:
        raise ConfigError("test fraction must lie in (0, 1)")
    interner, links = _read(args)
    ds = split(links, args.test_fraction, derive_seed(args.seed, args.rep),
               interner.num_users, interner.num_objects)
    save_split(ds, interner, args.out_dir, test_fraction=args.test_fraction,
               threshold=args.threshold)
    print(f"train\t{len(ds.train)}\ntest\t{len(ds.test)}\nseed\t{ds.seed}\n"
          f"written to\t{args.out_dir}")
    return EXIT_OK


def cmd_report(args) -> int:
    config = _config(args)
    reports = run_experiment(config)
    if not reports:
        return EXIT_OK
    for L in config.list_lengths:
        print(f"L = {L}")
        print(format_table(reports, L))
    print(f"report written to {os.path.join(config.out_dir, 'report.csv')}")
    return EXIT_OK


def cmd_run(args) -> int:
    if len(args.alg) != 1:
        raise ConfigError("run takes exactly one --alg; use report for several")
    return cmd_report(args)


def cmd_grid(args) -> int:
    config = _config(args)
    if len(config.algorithms) != 1 or config.algorithms[0] not in ("UCBI", "HNBI"):
        raise ConfigError("grid takes --alg UCBI or --alg HNBI")
    alg = config.algorithms[0]
    result = grid_search(config, config.objective, alg)
    os.makedirs(config.out_dir, exist_ok=True)
    path = os.path.join(config.out_dir, f"grid_{alg}.csv")
    result.write_csv(path)
    for objective in ("auc", "precision"):
        best = ", ".join(f"{k}={v:.2f}" for k, v in result.best(objective).items())
        print(f"best {objective}: {result.best_value(objective):.4f} at {best}")
    print(f"grid written to {path}")
    return EXIT_OK


def cmd_curve(args) -> int:
    config = _config(args)
    paths = curve_export(config)
    for tag, path in paths.items():
        print(f"{tag}\t{path}")
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "split": cmd_split,
    "run": cmd_run,
    "report": cmd_report,
    "grid": cmd_grid,
    "curve": cmd_curve,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"cbirec: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"cbirec: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"cbirec: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
