"""Command-line interface.

Exit codes: 0 success, 2 numerical trouble in a solver, 1 usage or
parse errors.  Numeric output uses 5 decimal places.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench, cuts, driver, exact, oracle
from .backend import CvxpyBackend, SolverError
from .conic import PRESETS, RelaxationLevel
from .model import DimensionError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load(path: str):
    try:
        return bench.load(path)
    except FileNotFoundError:
        print(f"error: no such file: {path}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE) from None
    except (bench.ParseError, DimensionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE) from None


def _vec(x) -> str:
    return "[" + ", ".join(f"{v:.5f}" for v in x) + "]"


def cmd_solve(args) -> int:
    inst = _load(args.file)
    level = RelaxationLevel.from_name(args.level)
    config = driver.DriverConfig(max_rounds=args.rounds,
                                 per_round_cap=args.cap,
                                 threshold=args.threshold, seed=args.seed)
    report = driver.run(inst, level, config, CvxpyBackend())
    for line in report.log_lines():
        print(line)
    if report.status.startswith("backend-failure"):
        print(f"status: {report.status}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"relaxation value: {report.final_value:.5f}")
    print(f"feasible value:   {report.feasible_value:.5f}")
    print(f"rank ratio:       {report.rank_ratio:.2e}")
    print(f"etri cuts: {report.num_etri_cuts}  "
          f"soc blocks: {report.num_soc_blocks}")
    if report.extracted_x is not None:
        print(f"extracted x: {_vec(report.extracted_x)}")
    return EXIT_OK


def cmd_exact3(args) -> int:
    inst = _load(args.file)
    if inst.n != 3:
        print(f"error: exact3 requires n = 3, got n = {inst.n}",
              file=sys.stderr)
        return EXIT_USAGE
    try:
        value = exact.solve_exact_qpb3(inst, CvxpyBackend())
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"exact value: {value:.5f}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    inst = _load(args.file)
    try:
        sol = oracle.solve_global(inst)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"optimal value: {sol.value:.5f}")
    print(f"argmax x: {_vec(sol.x)}")
    return EXIT_OK


def cmd_maxviol(args) -> int:
    backend = CvxpyBackend()
    try:
        artifact = bench.run_tables(f"t{args.table}", backend)
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(artifact.text)
    if args.delimited:
        print(artifact.delimited(), end="")
    return EXIT_OK


def cmd_tables(args) -> int:
    try:
        artifact = bench.run_tables(args.which, CvxpyBackend(), seed=args.seed)
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(artifact.text)
    if args.delimited:
        print(artifact.delimited(), end="")
    return EXIT_OK


def cmd_gen(args) -> int:
    outdir = Path(args.out) if args.out else None
    if outdir:
        outdir.mkdir(parents=True, exist_ok=True)
    for number in range(1, args.num + 1):
        spec = bench.GenSpec(n=args.n, d=args.d, number=number,
                             seed=args.seed, diag=args.diag)
        inst = bench.generate(spec)
        text = bench.serialize(inst)
        if outdir:
            path = outdir / f"{inst.label}.boxqp"
            path.write_text(text, encoding="utf-8")
            print(path)
        else:
            print(text, end="")
            if number < args.num:
                print()
    return EXIT_OK


def cmd_verify_catalog(_args) -> int:
    results = cuts.verify_catalogs()
    ok = all(results.values())
    for family, match in sorted(results.items()):
        size = len(cuts.canonical_family(family))
        print(f"{family}: {size} cuts, catalog match: {match}")
    print("catalogs verified" if ok else "catalog mismatch")
    return EXIT_OK if ok else EXIT_USAGE


def cmd_extract(args) -> int:
    inst = _load(args.file)
    level = RelaxationLevel.from_name(args.level)
    report = driver.run(inst, level, driver.DriverConfig(extract=False),
                        CvxpyBackend())
    if report.status.startswith("backend-failure"):
        print(f"status: {report.status}", file=sys.stderr)
        return EXIT_NUMERICAL
    base = RelaxationLevel(rlt=level.rlt, tri=level.tri)
    try:
        x = driver.extract_rank_one(inst, args.pin, base, report.active_cuts,
                                    report.blocks, CvxpyBackend(), args.seed)
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if x is None:
        print("no rank-one solution found at the pinned value")
        return EXIT_OK
    from .model import feasible_value
    print(f"extracted x: {_vec(x)}")
    print(f"feasible value: {feasible_value(inst, x):.5f}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="boxqp",
                     description="Strengthened conic relaxations for "
                                 "box-constrained quadratic programs.")
    sub = parser.add_subparsers(dest="command", required=True)
    levels = sorted(PRESETS)

    p = sub.add_parser("solve", help="cutting-plane solve of an instance file")
    p.add_argument("file")
    p.add_argument("--level", default="+soc", choices=levels)
    p.add_argument("--rounds", type=int, default=20)
    p.add_argument("--cap", type=int, default=10)
    p.add_argument("--threshold", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("exact3", help="exact disjunctive solve (n = 3)")
    p.add_argument("file")
    p.set_defaults(func=cmd_exact3)

    p = sub.add_parser("oracle", help="exact global solve (n <= 12)")
    p.add_argument("file")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("maxviol", help="maximum-violation grids")
    p.add_argument("--table", type=int, choices=(1, 2), required=True)
    p.add_argument("--delimited", action="store_true")
    p.set_defaults(func=cmd_maxviol)

    p = sub.add_parser("tables", help="experiment table runners")
    p.add_argument("--which", required=True,
                   choices=("t1", "t2", "t3", "t4", "t5"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delimited", action="store_true")
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("gen", help="generate random instances")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--num", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--diag", choices=("same", "zero"), default="same")
    p.add_argument("--out", help="directory for one file per instance")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("verify-catalog",
                       help="check generated families against the catalogs")
    p.set_defaults(func=cmd_verify_catalog)

    p = sub.add_parser("extract", help="rank-one extraction at a pinned value")
    p.add_argument("file")
    p.add_argument("--pin", type=float, required=True)
    p.add_argument("--level", default="+soc", choices=levels)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_extract)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
