"""Command line entry point: ``pdegreedy {solve,study,verify}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, RunConfig
from .greedy import NumericalBreakdown


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdegreedy", description="Greedy kernel collocation for linear PDEs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("solve", "single greedy run with a per-step trace"),
                           ("study", "convergence study with slope fits")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides config 'out')")
        p.add_argument("--threads", type=int, help="worker threads for candidate sweeps")
        p.add_argument("--seed", type=int, help="candidate seed (overrides config)")
    p = sub.add_parser("verify", help="run kernel, oracle and determinism self-checks")
    p.add_argument("--config", help="optional JSON configuration supplying the kernel")
    p.add_argument("--threads", type=int, help=argparse.SUPPRESS)
    p.add_argument("--seed", type=int, help=argparse.SUPPRESS)
    # test hook: scale one psi derivative, e.g. "2:1.01"
    p.add_argument("--inject-fault", help=argparse.SUPPRESS)
    return parser


def _error(exc: BaseException, code: int = 1) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
    return code


def _load(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    if args.threads is not None:
        cfg.threads = args.threads
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.validate()
    return cfg


def _verify(args) -> int:
    from .verify import run_checks

    kernel = None
    if args.config:
        kernel = _load(args).make_kernel()
    if args.inject_fault:
        order, factor = args.inject_fault.split(":")
        from .kernels import MaternKernel

        base = kernel or MaternKernel("5/2", 1.0)
        kernel = base.with_fault(int(order), float(factor))
    results = run_checks(kernel)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(json.dumps({"failed": failed}), file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    from . import harness

    try:
        if args.command == "verify":
            return _verify(args)
        cfg = _load(args)
        if args.command == "solve":
            summary = harness.solve(cfg, args.out)
            print(f"n={summary['n']} stop={summary['stop_reason']} linf={summary['final_linf_error']:.3e}")
            if summary["breakdown"]:
                return _error(NumericalBreakdown(summary["breakdown"]))
        else:
            report = harness.study(cfg, args.out)
            for r in report["runs"]:
                s = r["slopes"]["windowed_min"]
                print(f"beta={r['beta']:g} n={r['n']} E-slope={'n/a' if s is None else format(s, '.3f')} "
                      f"predicted={r['predicted']['windowed_min']:.3f} "
                      f"pn-slope={r['slopes']['pn'] if r['slopes']['pn'] is None else format(r['slopes']['pn'], '.3f')} "
                      f"predicted={r['predicted']['pn']:.3f}")
            broken = [f"beta={r['beta']:g}: {r['breakdown']}" for r in report["runs"] if r["breakdown"]]
            if broken:
                return _error(NumericalBreakdown("; ".join(broken)))
        return 0
    except (ConfigError, NumericalBreakdown, ValueError, OSError) as exc:
        return _error(exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
