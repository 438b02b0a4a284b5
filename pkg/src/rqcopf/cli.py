"""Command-line interface: solve, sweep, table, envelope and export.

Exit codes: 0 on success, 1 when a solve does not reach Optimal, 2 on I/O,
parse or argument errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .builders import BuildOptions, optimality_gap, solve_relaxation
from .caseio import CaseDataError, NetworkCase, load_case
from .conic import Tolerances
from .conic.export import export_program
from .builders import build
from .envelopes import UnsupportedInterval
from .experiments import (DEFAULT_GRID, SUGGESTED_PSI, ManifestError, envelope_report, gap_table,
                          load_manifest, parse_psi_range, sweep, table_csv, table_json,
                          table_markdown, summary_lines)

log = logging.getLogger("rqcopf")

EXIT_OK, EXIT_SOLVE, EXIT_IO = 0, 1, 2
_RANGE_FLAGS = ("--psi-range", "--interval")


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_IO):
        super().__init__(message)
        self.code = code


def _read_case(path: str) -> NetworkCase:
    try:
        return load_case(path)
    except FileNotFoundError:
        raise CliError(f"case file not found: {path}")
    except OSError as exc:
        raise CliError(f"cannot read case file {path}: {exc.strerror or exc}")
    except ValueError as exc:
        raise CliError(f"cannot parse case file {path}: {exc}")


def _tolerances(args) -> Tolerances | None:
    if args.tol is None:
        return None
    return Tolerances(feas=args.tol, gap=args.tol)


def _options(args) -> BuildOptions:
    return BuildOptions(fallback=getattr(args, "fallback", False))


def _psi(args) -> float:
    if args.kind == "qc":
        if args.psi is not None:
            log.warning("psi is ignored for the qc relaxation")
        return 0.0
    return SUGGESTED_PSI if args.psi is None else args.psi


def _local(args, case_path: str) -> tuple[float | None, str]:
    """Local objective and its provenance: --local wins, then a manifest match."""
    if args.local is not None:
        return args.local, args.local_source
    if args.manifest:
        stem = Path(case_path).stem
        for e in _manifest(args.manifest):
            if e.name == stem or e.file.stem == stem or e.name == stem.removeprefix("pglib_opf_"):
                return e.local, e.source
        log.warning("no manifest entry for %s; gap not reported", stem)
    return None, "none"


def _manifest(path: str):
    try:
        return load_manifest(path)
    except FileNotFoundError:
        raise CliError(f"manifest not found: {path}")
    except OSError as exc:
        raise CliError(f"cannot read manifest {path}: {exc.strerror or exc}")
    except ManifestError as exc:
        raise CliError(f"invalid manifest {exc}")


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc.strerror or exc}")


def _grid(text: str):
    try:
        return parse_psi_range(text)
    except ValueError as exc:
        raise CliError(str(exc))


# ---------------------------------------------------------------- commands

def cmd_solve(args) -> int:
    case = _read_case(args.case)
    psi = _psi(args)
    local, source = _local(args, args.case)
    res = solve_relaxation(case, args.kind, math.radians(psi), _options(args), _tolerances(args))
    ok = res.status == "Optimal"
    gap = optimality_gap(local, res.objective) if ok and local is not None else math.nan
    row = {"case": case.name, "kind": args.kind, "psi_deg": psi, "status": res.status,
           "bound": res.objective, "local_objective": local, "local_source": source,
           "gap_pct": 100 * gap, "solve_time": res.solve_time, "build_time": res.build_time,
           "iterations": res.report.iterations if res.report else 0,
           "max_kkt": res.report.max_kkt if res.report else math.nan}
    if args.format == "json":
        text = json.dumps({k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                           for k, v in row.items()}, indent=2) + "\n"
    elif args.format == "md":
        text = ("| " + " | ".join(row) + " |\n|" + "---|" * len(row) + "\n| "
                + " | ".join(_cell(v) for v in row.values()) + " |\n")
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(row.keys())
        w.writerow(_cell(v) for v in row.values())
        text = buf.getvalue()
    _emit(text, args.out)
    if not ok:
        print(f"error: {args.kind} solve ended with status {res.status}", file=sys.stderr)
        return EXIT_SOLVE
    return EXIT_OK


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if not math.isfinite(v) else f"{v:.10g}"
    return str(v)


def cmd_sweep(args) -> int:
    case = _read_case(args.case)
    if args.kind == "qc":
        raise CliError("sweep needs --kind rqc or trqc")
    grid = _grid(args.psi_range)
    local, source = _local(args, args.case)
    if local is None:
        raise CliError("sweep needs a local objective (--local or --manifest)")
    res = sweep(case, args.kind, grid, local, source, options=_options(args), tol=_tolerances(args),
                jobs=args.jobs)
    if args.format == "json":
        text = json.dumps(res.to_dict(), indent=2) + "\n"
    elif args.format == "md":
        lines = ["| psi (deg) | bound | gap (%) | normalized |", "|---|---|---|---|"]
        for p, b, g, n in zip(res.psi_deg, res.bound, res.gap, res.normalized):
            lines.append(f"| {p:g} | {_cell(float(b))} | {_cell(100 * float(g))} | {_cell(float(n))} |")
        lines.append(f"\npsi* = {res.psi_star:g} deg, min gap {100 * res.min_gap:.4f}% "
                     f"(local {local:g}, {source})")
        text = "\n".join(lines) + "\n"
    else:
        text = res.to_csv()
    _emit(text, args.out)
    for name, s in res.symmetry().items():
        print(f"symmetry {name}: pairs={s['pairs']} max_diff={s['max_abs_diff_pp']:.3g} pp",
              file=sys.stderr)
    if not any(math.isfinite(g) for g in res.gap):
        print("error: every grid point failed", file=sys.stderr)
        return EXIT_SOLVE
    return EXIT_OK


def cmd_table(args) -> int:
    if not args.manifest:
        raise CliError("table needs --manifest")
    entries = _manifest(args.manifest)
    grid = None if args.skip_star else _grid(args.psi_range or "-90:90:1")
    rows = gap_table(entries, grid, options=_options(args), tol=_tolerances(args), jobs=args.jobs)
    if args.format == "md":
        text = table_markdown(rows)
    elif args.format == "json":
        text = table_json(rows) + "\n"
    else:
        text = table_csv(rows)
        for line in summary_lines(rows):
            print(line, file=sys.stderr)
    _emit(text, args.out)
    if args.md_out:
        _emit(table_markdown(rows), args.md_out)
    for r in rows:
        for e in r.errors:
            print(f"warning: {r.case}: {e}", file=sys.stderr)
    return EXIT_OK


def cmd_envelope(args) -> int:
    try:
        lo, hi = (float(t) for t in args.interval.split(":"))
        g, b = (float(t) for t in args.admittance.split(","))
    except ValueError:
        raise CliError("--interval is lo:hi (deg) and --admittance is g,b")
    if args.delta is not None:
        g, b = args.magnitude * math.cos(math.radians(args.delta)), args.magnitude * math.sin(math.radians(args.delta))
    try:
        rep = envelope_report(lo, hi, g, b, args.psi or 0.0, args.samples, args.fallback)
    except UnsupportedInterval as exc:
        raise CliError(f"{exc}; rerun with --fallback for box-plus-secant envelopes", EXIT_SOLVE)
    except ValueError as exc:
        raise CliError(str(exc))
    text = rep.to_csv() if args.format == "csv" else json.dumps(rep.to_dict(), indent=2) + "\n"
    _emit(text, args.out)
    print(f"dominance: {rep.verdict.verdict}", file=sys.stderr)
    return EXIT_OK


def cmd_export(args) -> int:
    case = _read_case(args.case)
    prog, _ = build(case, args.kind, math.radians(_psi(args)), _options(args))
    fmt = "json" if args.format == "json" else "conic"
    _emit(export_program(prog, fmt), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rqcopf", description="QC, RQC and TRQC relaxations of AC OPF.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, case=True, kind=True):
        if case:
            sp.add_argument("case", help="MATPOWER case file")
        if kind:
            sp.add_argument("--kind", choices=("qc", "rqc", "trqc"), default="rqc")
            sp.add_argument("--psi", type=float, default=None,
                            help=f"base power angle in degrees (default {SUGGESTED_PSI:g})")
        sp.add_argument("--tol", type=float, default=None, help="solver feasibility and gap tolerance")
        sp.add_argument("--out", default=None, help="output file (default stdout)")
        sp.add_argument("--fallback", action="store_true",
                        help="box-plus-secant envelopes for intervals without a table row")

    def local(sp):
        sp.add_argument("--local", type=float, default=None, help="local (feasible) objective value")
        sp.add_argument("--local-source", default="cli", help="provenance tag for --local")
        sp.add_argument("--manifest", default=None, help="manifest to look the local objective up in")

    s = sub.add_parser("solve", help="solve one relaxation")
    common(s)
    local(s)
    s.add_argument("--format", choices=("csv", "json", "md"), default="csv")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("sweep", help="sweep the base power angle")
    common(s)
    local(s)
    s.add_argument("--psi-range", default=DEFAULT_GRID, help=f"lo:hi:step in degrees (default {DEFAULT_GRID})")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--format", choices=("csv", "json", "md"), default="csv")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("table", help="gap table over a manifest")
    common(s, case=False, kind=False)
    s.add_argument("--manifest", default=None)
    s.add_argument("--psi-range", default=None, help="grid for psi* (default -90:90:1)")
    s.add_argument("--skip-star", action="store_true", help="leave the psi* columns empty")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--md-out", default=None, help="also write the Markdown table here")
    s.add_argument("--format", choices=("csv", "json", "md"), default="csv")
    s.set_defaults(func=cmd_table)

    s = sub.add_parser("envelope", help="compare rectangular and polar envelopes")
    s.add_argument("--interval", default="-30:30", help="angle difference interval lo:hi in degrees")
    s.add_argument("--admittance", default="0.6,-0.8", help="g,b of the line")
    s.add_argument("--delta", type=float, default=None, help="admittance angle in degrees (overrides --admittance)")
    s.add_argument("--magnitude", type=float, default=1.0, help="admittance magnitude with --delta")
    s.add_argument("--psi", type=float, default=0.0)
    s.add_argument("--samples", type=int, default=181)
    s.add_argument("--fallback", action="store_true")
    s.add_argument("--out", default=None)
    s.add_argument("--format", choices=("csv", "json"), default="json")
    s.set_defaults(func=cmd_envelope)

    s = sub.add_parser("export", help="write the conic program without solving")
    common(s)
    s.add_argument("--format", choices=("conic", "json"), default="conic")
    s.set_defaults(func=cmd_export)
    return p


def _join_negative(argv: list[str]) -> list[str]:
    # let "--psi-range -90:90:1" through argparse, which would read it as a flag
    out, k = [], 0
    while k < len(argv):
        if argv[k] in _RANGE_FLAGS and k + 1 < len(argv) and argv[k + 1].startswith("-"):
            out.append(f"{argv[k]}={argv[k + 1]}")
            k += 2
        else:
            out.append(argv[k])
            k += 1
    return out


def main(argv: Sequence[str] | None = None) -> int:
    argv = _join_negative(list(sys.argv[1:] if argv is None else argv))
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except UnsupportedInterval as exc:
        print(f"error: {exc}; rerun with --fallback for box-plus-secant envelopes", file=sys.stderr)
        return EXIT_SOLVE
    except CaseDataError as exc:
        print(f"error: invalid case data: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
