"""``afheat`` command line: run presets, recompute rates, sweep the Fourier symbol."""

import argparse
import math
import sys

from ..fourier import error_split_report, write_symbol_csv
from .convergence import read_error_csv
from .presets import PRESETS, PresetError, parse_override, run_preset


def _print_bundle(bundle, out=None):
    out = sys.stdout if out is None else out
    for label, table in bundle.tables.items():
        print(f"== {label} (L1 errors, rates in parentheses)", file=out)
        print(table.format("L1"), file=out)
    for name, value in bundle.metrics.items():
        if name.startswith(("limit_distance", "anisotropy")) or name == "heat_reference_tail_bound":
            print(f"{name}: {value}", file=out)
    for c in bundle.checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}", file=out)


def cmd_run(args) -> int:
    if args.list:
        for name in sorted(PRESETS):
            print(name)
        return 0
    if args.preset is None:
        print("error: a preset name is required (see --list)", file=sys.stderr)
        return 2
    overrides = dict(parse_override(o) for o in args.override)
    try:
        bundle = run_preset(args.preset, overrides, args.out)
    except PresetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _print_bundle(bundle)
    if args.out:
        print(f"wrote {len(bundle.files)} files to {args.out}")
    if args.check and not bundle.passed:
        return 1
    return 0


def cmd_rates(args) -> int:
    for path in args.files:
        for label, table in read_error_csv(path).items():
            print(f"== {path} {label}")
            print(table.format(args.norm))
    return 0


def cmd_symbol(args) -> int:
    if args.meshes:
        dxs = [2 * math.pi / n for n in args.meshes]
    elif args.dx:
        dxs = args.dx
    else:
        print("error: give --meshes or --dx", file=sys.stderr)
        return 2
    report = error_split_report(args.variant, args.omega, args.epsilon, args.sigma, args.t, dxs)
    print(f"{'dx':>12} {'|dlambda|':>12} {'eigvec':>12} {'exp':>12} {'spurious':>12}")
    for r in report.rows:
        print(f"{r.dx:12.4e} {r.eigenvalue_error:12.4e} {r.eigenvector_term:12.4e} "
              f"{r.exponential_term:12.4e} {r.spurious_size:12.4e}")
    for name, val in report.orders.items():
        print(f"order {name}: {val:.3f}")
    print(f"eigenvalue prefactor: {report.eigenvalue_prefactor:.6g}")
    if args.out:
        write_symbol_csv(report, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="afheat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment preset")
    run.add_argument("preset", nargs="?", help="preset name")
    run.add_argument("--override", "-o", action="append", default=[], metavar="KEY=VALUE",
                     help="config override, value parsed as JSON (repeatable)")
    run.add_argument("--out", help="output directory for CSV files and manifest.json")
    run.add_argument("--check", action="store_true", help="exit with status 1 if any check fails")
    run.add_argument("--list", action="store_true", help="list presets and exit")
    run.set_defaults(func=cmd_run)

    rates = sub.add_parser("rates", help="print convergence rates from error CSV files")
    rates.add_argument("files", nargs="+")
    rates.add_argument("--norm", default="L1", choices=["L1", "L2", "Linf"])
    rates.set_defaults(func=cmd_rates)

    sym = sub.add_parser("symbol", help="Fourier error split over a dx sweep")
    sym.add_argument("--variant", default="js", choices=["js", "alt"])
    sym.add_argument("--omega", type=float, default=1.0)
    sym.add_argument("--epsilon", type=float, default=0.5)
    sym.add_argument("--sigma", type=float, default=1.0)
    sym.add_argument("--t", type=float, default=1.0)
    sym.add_argument("--meshes", type=int, nargs="*", help="dx = 2 pi / N for each N")
    sym.add_argument("--dx", type=float, nargs="*")
    sym.add_argument("--out", help="CSV output path")
    sym.set_defaults(func=cmd_symbol)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
