"""Command-line driver: run, convergence study, reversibility harness."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import (load_config, write_convergence, write_timeseries)
from .driver import refinement_study, reversibility_harness, run
from .errors import ConfigError, SLDGError
from .mesh import dump_field


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sldg",
        description="Conservative semi-Lagrangian DG transport solver "
                    "with exponential time integrators")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
            ("run", "integrate one scenario and write diagnostics"),
            ("convergence", "mesh or CFL refinement study"),
            ("reverse", "VP time-reversibility error")):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", required=True, help="INI configuration")
        p.add_argument("--out", default=None,
                       help="output directory (default from [output])")
        p.add_argument("--override", action="append", default=[],
                       metavar="SECTION.KEY=VALUE",
                       help="override a configuration entry (repeatable)")
    return parser


def _prepare(args):
    manifest = load_config(args.config, overrides=args.override)
    outdir = args.out or manifest.outdir
    os.makedirs(outdir, exist_ok=True)
    return manifest, outdir


def _cmd_run(args):
    manifest, outdir = _prepare(args)
    dumps = []

    def callback(t, state, outcome):
        if manifest.dump_every > 0 and \
                len(dumps) * manifest.dump_every <= callback.step:
            path = os.path.join(outdir, f"solution_{callback.step:06d}.txt")
            dump_field(state, path)
            dumps.append(path)
        callback.step += 1
    callback.step = 1

    result = run(manifest.config,
                 step_callback=callback if manifest.dump_every else None)
    write_timeseries(result.records, os.path.join(outdir, "timeseries.csv"))
    dump_field(result.final, os.path.join(outdir, "solution.txt"))
    last = result.records[-1]
    print(f"completed {result.n_steps} steps to t = {last.t:.6g}; "
          f"mass deviation {last.dev_mass:.3e}")
    return 0


def _cmd_convergence(args):
    manifest, outdir = _prepare(args)
    if manifest.mesh_list:
        rows = refinement_study(manifest.config, meshes=manifest.mesh_list)
    elif manifest.cfl_list:
        rows = refinement_study(manifest.config, cfls=manifest.cfl_list,
                                reference_cfl=manifest.reference_cfl)
    else:
        raise ConfigError("convergence needs [mesh] mesh_list or "
                          "[time] cfl_list")
    path = os.path.join(outdir, "convergence.csv")
    write_convergence(rows, path)
    for row in rows:
        key = "n" if "n" in row else "cfl"
        order = row.get("order")
        print(f"{key}={row[key]:g}  error={row['error']:.6e}"
              + (f"  order={order:.3f}" if order is not None else ""))
    return 0


def _cmd_reverse(args):
    manifest, outdir = _prepare(args)
    out = reversibility_harness(manifest.config)
    write_timeseries(out["records"], os.path.join(outdir, "timeseries.csv"))
    dump_field(out["final"], os.path.join(outdir, "solution.txt"))
    path = os.path.join(outdir, "reverse.csv")
    with open(path, "w", newline="") as fh:
        fh.write("norm,error\nL1,%.17g\nL2,%.17g\nLinf,%.17g\n"
                 % (out["l1"], out["l2"], out["linf"]))
    print(f"reversibility errors: L1={out['l1']:.6e} L2={out['l2']:.6e} "
          f"Linf={out['linf']:.6e}")
    return 0


_COMMANDS = {"run": _cmd_run, "convergence": _cmd_convergence,
             "reverse": _cmd_reverse}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SLDGError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
