"""Command-line interface: test, diagnose, simulate, table1."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import diagnostics, permtest, simharness
from .core import load_csv

_STAT_CHOICES = {"mean": permtest.MEAN_DIFF, "mmd": permtest.MMD2}
_SCHEME_CHOICES = {
    "block": permtest.RESTRICTED_MATCHING,
    "single": permtest.RESTRICTED_SINGLE_SWAP,
    "full": permtest.FULL_RELABEL,
}


def _add_test_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", required=True, help="CSV with d numeric columns plus a 'group' column")
    parser.add_argument("--statistic", choices=sorted(_STAT_CHOICES), default="mean")
    parser.add_argument("--scheme", choices=sorted(_SCHEME_CHOICES), default="block")
    parser.add_argument("--rho", type=float, default=0.2)
    parser.add_argument("--blocks", type=int, default=4)
    parser.add_argument("--perms", type=int, default=100)
    parser.add_argument("--alpha", type=float, default=0.05)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--bandwidth", default="median", help="'median' or a positive float")
    parser.add_argument("--sided", choices=["one", "two"], default="two")
    parser.add_argument("--debug", action="store_true", help="verify incremental evaluation against full recomputation")


def _config_from_args(args: argparse.Namespace) -> permtest.TestConfig:
    bandwidth = args.bandwidth if args.bandwidth == "median" else float(args.bandwidth)
    return permtest.TestConfig(
        statistic=_STAT_CHOICES[args.statistic],
        scheme=_SCHEME_CHOICES[args.scheme],
        n_perms=args.perms,
        alpha=args.alpha,
        rho=args.rho,
        blocks=args.blocks,
        bandwidth=bandwidth,
        seed=args.seed,
        sided=args.sided,
        debug=getattr(args, "debug", False),
    )


def _fmt(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _cmd_test(args: argparse.Namespace) -> int:
    sample, labels = load_csv(args.input)
    result = permtest.run_test(sample, labels, _config_from_args(args))
    print(
        f"p_value={_fmt(result.p_value)} observed={_fmt(result.observed_t)} "
        f"critical={_fmt(result.critical_value_empirical)} reject={_fmt(result.reject)} "
        f"n1={result.n1} n2={result.n2} L_max={_fmt(result.l_max)}"
    )
    if args.dump_perm_stats:
        path = Path(args.dump_perm_stats)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["m", "statistic"])
            for m, value in enumerate(result.perm_stats, start=1):
                writer.writerow([m, repr(float(value))])
    return 0


def _cmd_diagnose(args: argparse.Namespace) -> int:
    sample, labels = load_csv(args.input)
    report = diagnostics.diagnose(
        sample, labels, _config_from_args(args), replicates=args.replicates
    )
    for line in report.lines():
        print(line)
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    spec = simharness.load_spec(args.spec)
    paths = simharness.run_simulation(spec, args.output_dir)
    for path in paths:
        print(f"wrote {path}")
    return 0


def _cmd_table1(args: argparse.Namespace) -> int:
    path = simharness.run_table1(args.output_dir, n_sim=args.nsim, seed=args.seed)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockperm",
        description="Block-restricted one-swap permutation tests for two-sample problems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_test = sub.add_parser("test", help="run one permutation test on a CSV dataset")
    _add_test_flags(p_test)
    p_test.add_argument("--dump-perm-stats", default=None, help="write the M reference statistics to this CSV")
    p_test.set_defaults(func=_cmd_test)

    p_diag = sub.add_parser("diagnose", help="print the data-dependent tail diagnostics")
    _add_test_flags(p_diag)
    p_diag.add_argument("--replicates", type=int, default=200, help="Monte Carlo size for the variance comparison")
    p_diag.set_defaults(func=_cmd_diagnose)

    p_sim = sub.add_parser("simulate", help="run a power study from a spec file")
    p_sim.add_argument("--spec", required=True)
    p_sim.add_argument("--output-dir", default=".")
    p_sim.set_defaults(func=_cmd_simulate)

    p_t1 = sub.add_parser("table1", help="run the built-in power/type-I reproduction grid")
    p_t1.add_argument("--nsim", type=int, default=200)
    p_t1.add_argument("--seed", type=int, default=20240601)
    p_t1.add_argument("--output-dir", default=".")
    p_t1.set_defaults(func=_cmd_table1)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
