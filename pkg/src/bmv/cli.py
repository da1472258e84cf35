"""Command-line entry point: ``bmv verify | search | report | selftest``.

Exit codes: 0 all pass, 10 mathematical finding, 1 internal consistency
error, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

from bmv import harness, matcore
from bmv.errors import BMVError, DomainError
from bmv.report import CHECK_IDS, report_emit


def _grid(text: str) -> tuple:
    try:
        start, step, count = text.split(":")
        return float(start), float(step), int(count)
    except ValueError:
        raise argparse.ArgumentTypeError("grid must look like start:step:count, e.g. 0:0.05:64")


def _instance_args(p: argparse.ArgumentParser):
    p.add_argument("--n", type=int, help="matrix size (default: sweep the check's range)")
    p.add_argument("--p", type=float, help="exponent (lambda for det_identity)")
    p.add_argument("--k", type=int, help="number of B letters / simplex order")
    p.add_argument("--j", type=int, help="elementary symmetric order")
    p.add_argument("--r", type=int, help="derivative order")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=42, help="master seed")
    p.add_argument("--tol", type=float, help="relative tolerance override")
    p.add_argument("--grid", type=_grid, help="lambda grid start:step:count")
    p.add_argument("--exact", action=argparse.BooleanOptionalAction, default=None,
                   help="rational instances and exact arithmetic where supported")
    p.add_argument("--matrix-a", help="JSON matrix file for A")
    p.add_argument("--matrix-b", help="JSON matrix file for B")
    p.add_argument("--out", help="directory for reports and certificates")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bmv", description="Numerical checks of BMV-type trace inequalities.")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run one check over seeded instances")
    v.add_argument("check", choices=CHECK_IDS)
    _instance_args(v)

    s = sub.add_parser("search", help="minimize a check's margin")
    s.add_argument("target", choices=harness.SEARCH_TARGETS)
    s.add_argument("--trials", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--n", type=int)
    s.add_argument("--p", type=float)
    s.add_argument("--out", help="directory for the best instance / certificate")

    r = sub.add_parser("report", help="run the suite and write reports")
    r.add_argument("--format", choices=("json", "csv"), required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--checks", nargs="+", choices=CHECK_IDS, default=list(CHECK_IDS))
    r.add_argument("--trials", type=int, default=200)
    r.add_argument("--seed", type=int, default=42)
    r.add_argument("--search-trials", type=int, default=100_000)

    sub.add_parser("selftest", help="planted violations must be reported as findings")
    return parser


def _load(path):
    if path is None:
        return None
    M = matcore.load_matrix(path)
    return M if isinstance(M, matcore.RationalSymmetricMatrix) else matcore.hermitian(M)


def _print_manifest(m: harness.RunManifest):
    for check, t in m.totals.items():
        w = m.worst.get(check, {})
        print(f"{check:16s} reports={t['reports']:5d} pass={t['pass']:5d} finding={t['finding']:3d} "
              f"error={t['error']:3d} worst_ratio={w.get('ratio', float('nan')):.3e}")
    for e in m.errors:
        print(f"consistency error: {e}", file=sys.stderr)
    print(f"exit {m.exit_code} ({m.seconds:.1f} s)")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            cfg = harness.TrialConfig(
                master_seed=args.seed, trials=args.trials, checks=(args.check,), n=args.n, p=args.p,
                k=args.k, j=args.j, r=args.r, exact=args.exact, tol=args.tol, grid=args.grid,
                matrix_a=_load(args.matrix_a), matrix_b=_load(args.matrix_b), out_dir=args.out)
            m = harness.run_suite(cfg)
            _print_manifest(m)
            return m.exit_code
        if args.command == "search":
            cfg = harness.TrialConfig(master_seed=args.seed, trials=args.trials, n=args.n, p=args.p,
                                      out_dir=args.out)
            res = harness.search_min(args.target, cfg)
            print(f"{res.target}: margin={res.margin:.6e} scale={res.scale:.3e} status={res.status}")
            if res.certificate:
                print(f"written: {res.certificate}")
            return harness.EXIT_PASS
        if args.command == "report":
            cfg = harness.TrialConfig(master_seed=args.seed, trials=args.trials, checks=tuple(args.checks),
                                      search_trials=args.search_trials)
            m = harness.run_suite(cfg)
            path = report_emit(m.reports, args.format, args.out)
            harness.write_manifest(m, args.out)
            _print_manifest(m)
            print(f"written: {path}")
            return m.exit_code
        if args.command == "selftest":
            code, lines = harness.selftest()
            for line in lines:
                print(line)
            print(f"exit {code}")
            return code
    except (DomainError, OSError, ValueError) as exc:
        print(f"bmv: {exc}", file=sys.stderr)
        return harness.EXIT_USAGE
    except BMVError as exc:
        print(f"bmv: internal error: {exc}", file=sys.stderr)
        return harness.EXIT_CONSISTENCY
    return harness.EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
