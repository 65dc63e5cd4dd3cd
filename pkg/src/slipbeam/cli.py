"""Command-line interface.

    slipbeam simulate --config run.cfg --out results/
    slipbeam verify   --config run.cfg --out results/
    slipbeam converge --config study.cfg --out results/
    slipbeam sweep    --config sweep.cfg --out results/

Exit codes: 0 ok, 2 configuration, 3 admissibility, 4 divergence/numerical,
5 decrement-identity violation.  Every failure prints one machine-parsable
line ``error <code> <ExceptionName>: <reason>`` on stderr.  ``--seed`` is
accepted for interface stability and ignored: runs are deterministic.
"""

from __future__ import annotations

import argparse
import sys

from . import runners
from .config import parse_config
from .errors import EXIT_OK, SimulationError


def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slipbeam",
        description="Layered-beam simulator with fading-memory damping",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, summary in (
        ("simulate", "run the time stepper and emit energy/state CSVs"),
        ("verify", "stride-1 run auditing the energy decrement identity"),
        ("converge", "self-convergence study over a mesh ladder"),
        ("sweep", "compare kernel variants and rank their decay fits"),
    ):
        p = sub.add_parser(name, help=summary)
        p.add_argument("--config", required=True, help="path to the run config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--stride", type=int, default=None,
                       help="observer stride (simulate mode only)")
        p.add_argument("--seed", type=int, default=None,
                       help="ignored; accepted for interface stability")
    return parser


def main(argv=None) -> int:
    args = _make_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        import dataclasses
        if cfg.mode != args.command:
            cfg = dataclasses.replace(
                cfg, mode=args.command,
                stride=1 if args.command == "verify" else cfg.stride)
        if args.command in ("simulate", "verify"):
            result = runners.run_simulate(cfg, args.out, stride=args.stride)
            print(f"{args.command} ok: {len(result.steps)} observations, "
                  f"E0 = {result.energies[0]:.6e}, "
                  f"E_final = {result.energies[-1]:.6e}")
            if cfg.mode == "verify" and result.closure:
                for convention, (mm, closes) in result.closure.items():
                    verdict = "closes" if closes else "does NOT close"
                    print(f"  identity under {convention}: max |mismatch| = "
                          f"{mm:.3e} ({verdict})")
        elif args.command == "converge":
            result = runners.run_converge(cfg, args.out)
            for i, lvl in enumerate(result.levels):
                print(f"  level {i}: J = {lvl.J:5d} h = {lvl.h:.5f} "
                      f"dt = {lvl.dt:.5f} error = {lvl.error:.6e} "
                      f"order = {lvl.order:.3f}")
            print(f"converge ok: observed order = {result.observed_order:.3f}")
            lo, hi = cfg.converge.order_min, cfg.converge.order_max
            if not lo <= result.observed_order <= hi:
                print(f"warning: observed order outside [{lo}, {hi}]",
                      file=sys.stderr)
        else:
            result = runners.run_sweep(cfg, args.out)
            for m in result.members:
                status = f"FAILED ({m.error})" if m.failed else (
                    f"preferred = {m.preferred}, exp R2 = {m.exp_fit.goodness:.4f}, "
                    f"alg R2 = {m.alg_fit.goodness:.4f}")
                print(f"  variant {m.name}: {status}")
            if result.any_failed:
                print("error 4 SweepMemberFailure: at least one variant failed",
                      file=sys.stderr)
                return 4
            print(f"sweep ok: report at {result.csv_path}")
    except SimulationError as exc:
        reason = str(exc).replace("\n", " ")
        print(f"error {exc.exit_code} {type(exc).__name__}: {reason}",
              file=sys.stderr)
        return exc.exit_code
    return EXIT_OK


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
