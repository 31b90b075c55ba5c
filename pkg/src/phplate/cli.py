"""Command-line driver: ``phplate verify|run|converge``.

Exit status 0 on success, 2 on a violated structural or energy invariant,
3 when a convergence rate falls below its threshold.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
import scipy.io

from .assembly import SCHEMES, StructureError, apply_essential_bcs, assemble_system, default_params
from .report import (
    ConvergenceReport,
    RATE_FIELDS,
    build_stamp,
    describe_structure,
    loglog_svg,
    structural_report,
)
from .simulation import PROTOCOL, build_mesh, simulate

log = logging.getLogger("phplate")

EXIT_OK, EXIT_INVARIANT, EXIT_RATE = 0, 2, 3
POWER_TOL = 1e-10
FORMATS = ("csv", "json", "svg")


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return vals


def _formats(text: str) -> set[str]:
    out = {f.strip().lower() for f in text.split(",") if f.strip()}
    bad = out - set(FORMATS)
    if bad:
        raise argparse.ArgumentTypeError(f"unknown format(s) {sorted(bad)}; choose from {FORMATS}")
    return out


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scheme", choices=SCHEMES, required=True)
    common.add_argument("--degree", type=_int_list, default=[1], metavar="K[,K...]",
                        help="polynomial degree(s) in {1,2,3}")
    common.add_argument("--n", type=_int_list, default=None, metavar="N1,N2,...",
                        help="cells per side of the unit square")
    common.add_argument("--dt-factor", type=_positive, default=0.1, help="dt = factor * h")
    common.add_argument("--tf", type=_positive, default=1.0, help="final time")
    common.add_argument("--E", type=_positive, default=None, help="Young's modulus")
    common.add_argument("--nu", type=float, default=None, help="Poisson ratio")
    common.add_argument("--rho", type=_positive, default=None, help="mass density")
    common.add_argument("--thickness", type=_positive, default=None, help="plate thickness")
    common.add_argument("--kshear", type=_positive, default=None, help="shear correction factor")
    common.add_argument("--diagonal", choices=("right", "left", "crisscross"), default="right",
                        help="triangulation pattern (afw, hhj)")
    common.add_argument("--out", type=Path, default=Path("phplate-out"))
    common.add_argument("--format", type=_formats, default=set(FORMATS), metavar="csv,json,svg")
    common.add_argument("--dump-mesh", action="store_true", help="write mesh vertices and cells")
    common.add_argument("--dump-matrices", action="store_true",
                        help="write M and J in Matrix Market (COO) format")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="phplate", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="structural checks of M and J")
    run = sub.add_parser("run", parents=[common], help="single simulations")
    run.add_argument("--zero-forcing", action="store_true",
                     help="disable forcing; the projected initial data evolve freely")
    sub.add_parser("converge", parents=[common], help="convergence sweep with rate check")
    return p


def params_from_args(args):
    p = default_params(args.scheme)
    over = {
        "E": args.E,
        "nu": args.nu,
        "rho": args.rho,
        "thickness": args.thickness,
        "k_sc": args.kshear,
    }
    return dataclasses.replace(p, **{k: v for k, v in over.items() if v is not None})


def _config(args, params) -> dict:
    return {
        "command": args.command,
        "scheme": args.scheme,
        "degrees": args.degree,
        "n": args.n,
        "dt_factor": args.dt_factor,
        "t_final": args.tf,
        "diagonal": args.diagonal,
        "zero_forcing": bool(getattr(args, "zero_forcing", False)),
        "params": dataclasses.asdict(params),
    }


def _metadata(args, params) -> dict:
    return {"config": _config(args, params), "protocol": PROTOCOL, "build": build_stamp()}


def _dump(args, system, tag: str) -> None:
    if args.dump_mesh:
        system.mesh.dump(args.out / f"mesh_{tag}.txt")
    if args.dump_matrices:
        scipy.io.mmwrite(str(args.out / f"M_{tag}.mtx"), system.M.tocoo())
        scipy.io.mmwrite(str(args.out / f"J_{tag}.mtx"), system.J.tocoo())
        np.savetxt(args.out / f"free_{tag}.txt", system.free, fmt="%d")


def cmd_verify(args, params) -> int:
    status = EXIT_OK
    reports = []
    for k in args.degree:
        for n in args.n:
            tag = f"{args.scheme}_k{k}_n{n}"
            try:
                system = apply_essential_bcs(
                    assemble_system(args.scheme, build_mesh(args.scheme, n, args.diagonal), k, params)
                )
            except StructureError as exc:
                print(f"{tag} invariant violation: {exc}")
                status = EXIT_INVARIANT
                continue
            rep = structural_report(system)
            reports.append(rep)
            for line in describe_structure(rep):
                print(line)
            if not rep["ok"]:
                status = EXIT_INVARIANT
            _dump(args, system, tag)
    if "json" in args.format:
        doc = {"reports": reports, "passed": status == EXIT_OK, "metadata": _metadata(args, params)}
        (args.out / f"verify_{args.scheme}.json").write_text(json.dumps(doc, indent=2))
    print("verify:", "PASS" if status == EXIT_OK else "FAIL")
    return status


def cmd_run(args, params) -> int:
    status = EXIT_OK
    forcing = not args.zero_forcing
    results = []
    for k in args.degree:
        for n in args.n:
            tag = f"{args.scheme}_k{k}_n{n}"
            res = simulate(args.scheme, n, k, params, args.dt_factor, args.tf,
                           forcing=forcing, diagonal=args.diagonal, measure_errors=forcing)
            traj = res.trajectory
            scale = float(np.max(np.abs(traj.energy))) or 1.0
            ok = res.max_power_residual <= POWER_TOL and all(math.isfinite(v) for v in res.errors.values())
            if not forcing:
                ok = ok and float(np.max(np.abs(traj.power_residual))) <= POWER_TOL * scale
            if not ok:
                status = EXIT_INVARIANT
            if "csv" in args.format:
                traj.write_csv(args.out / f"energy_{tag}.csv")
            summary = res.summary()
            summary["steps"] = len(traj.times) - 1
            summary["timings"] = res.timings
            results.append(summary)
            errs = ", ".join(f"{a}={b:.3e}" for a, b in res.errors.items())
            print(f"{tag} steps={summary['steps']} H(0)={traj.energy[0]:.6e} H(tf)={traj.energy[-1]:.6e} "
                  f"max power residual {res.max_power_residual:.2e}" + (f"; errors {errs}" if errs else ""))
            if args.dump_mesh or args.dump_matrices:
                system = apply_essential_bcs(
                    assemble_system(args.scheme, build_mesh(args.scheme, n, args.diagonal), k, params))
                _dump(args, system, tag)
    if "json" in args.format:
        doc = {"runs": results, "passed": status == EXIT_OK, "metadata": _metadata(args, params)}
        (args.out / f"run_{args.scheme}.json").write_text(json.dumps(doc, indent=2))
    print("run:", "PASS" if status == EXIT_OK else "FAIL (invariant)")
    return status


def cmd_converge(args, params) -> int:
    if len(args.n) < 2:
        print("converge needs at least two mesh levels", file=sys.stderr)
        return EXIT_INVARIANT
    status = EXIT_OK
    reports = []
    for k in args.degree:
        runs = []
        for n in sorted(args.n):
            res = simulate(args.scheme, n, k, params, args.dt_factor, args.tf, diagonal=args.diagonal)
            log.info("k=%d n=%d done in %.1fs", k, n, sum(res.timings.values()))
            if res.max_power_residual > POWER_TOL:
                status = EXIT_INVARIANT
            runs.append(res)
        rep = ConvergenceReport.from_runs(args.scheme, k, runs, _metadata(args, params))
        reports.append(rep)
        for name in rep.slopes:
            mark = ""
            if name in RATE_FIELDS[args.scheme]:
                mark = " ok" if rep.rate_check()[name] else " BELOW THRESHOLD"
            print(f"{args.scheme} k={k} {name}: slope {rep.slopes[name]:.3f}, "
                  f"finest-3 slope {rep.slopes_finest3[name]:.3f}{mark}")
        if "csv" in args.format:
            rep.write_csv(args.out / f"convergence_{args.scheme}_k{k}.csv")
        if "json" in args.format:
            rep.write_json(args.out / f"convergence_{args.scheme}_k{k}.json")
        if not rep.passed and status == EXIT_OK:
            status = EXIT_RATE
    if "svg" in args.format:
        for name in reports[0].slopes:
            series = []
            for rep in reports:
                rows = [r for r in rep.rows if r["field"] == name]
                series.append({"label": f"k={rep.degree}", "h": [r["h"] for r in rows],
                               "error": [r["error"] for r in rows], "slope": rep.degree})
            svg = loglog_svg(series, f"{args.scheme}: {name} error")
            (args.out / f"convergence_{args.scheme}_{name}.svg").write_text(svg)
    print("converge:", {EXIT_OK: "PASS", EXIT_RATE: "FAIL (rate)", EXIT_INVARIANT: "FAIL (invariant)"}[status])
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    bad = [k for k in args.degree if k not in (1, 2, 3)]
    if bad:
        print(f"degree must be in 1..3, got {bad}", file=sys.stderr)
        return EXIT_INVARIANT
    if args.n is None:
        args.n = [2, 4] if args.command == "verify" else [4, 8, 16, 32] if args.command == "converge" else [8]
    try:
        params = params_from_args(args)
    except ValueError as exc:
        print(f"invalid material parameters: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    args.out.mkdir(parents=True, exist_ok=True)
    handler = {"verify": cmd_verify, "run": cmd_run, "converge": cmd_converge}[args.command]
    return handler(args, params)


if __name__ == "__main__":
    sys.exit(main())
