"""``phasepop run|verify <scenario.json>``.

Exit codes: 0 ok, 2 config error, 3 fixed-point non-convergence,
4 verification failure (including oracle mismatch above threshold).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __version__
from .config import ConfigError, load_config
from .runner import run_oracle, run_scenario, scenario_checks, write_artifacts

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_VERIFY = 4

OUTPUT_ENV = "PHASEPOP_OUTPUT_DIR"

logger = logging.getLogger("phasepop")


def _output_dir(cfg):
    return os.environ.get(OUTPUT_ENV) or cfg.output_dir


def cmd_run(path) -> int:
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = run_scenario(cfg)
    oracle = run_oracle(result) if cfg.oracle.enabled and result.fields else None
    outdir = _output_dir(cfg)
    write_artifacts(result, outdir, oracle)
    print(f"{cfg.name}: wrote {len(result.fields)} snapshots to {outdir} "
          f"(conservation drift {result.mass_drift:.3g})", file=sys.stderr)
    if result.failure is not None:
        r = result.failure
        print(f"{cfg.path}: fixed point did not converge at t={r.t:g} "
              f"(mismatch {r.final_mismatch:.3g} after {r.iterations} iterations)", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    if oracle is not None:
        bad = [(t, l1) for t, l1 in zip(result.times, oracle.l1) if l1 > cfg.oracle.l1_threshold]
        for t, l1 in bad:
            print(f"{cfg.path}: oracle L1 {l1:.4f} exceeds {cfg.oracle.l1_threshold:g} at t={t:g}",
                  file=sys.stderr)
        if bad:
            return EXIT_VERIFY
    return EXIT_OK


def cmd_verify(path, refined: bool = True) -> int:
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not cfg.oracle.enabled:
        print(f"config error: {path}: verify needs an oracle block with \"enabled\": true", file=sys.stderr)
        return EXIT_CONFIG
    result = run_scenario(cfg)
    oracle = run_oracle(result) if result.fields else None
    fine = run_scenario(cfg.with_grid(cfg.grid.refined(2))) if refined else None
    checks = scenario_checks(result, oracle, fine)
    width = max(len(c.name) for c in checks)
    print(f"{'check':<{width}}  {'value':>12}  {'':2}  {'threshold':>10}  result")
    for c in checks:
        print(f"{c.name:<{width}}  {c.value:>12.4g}  {c.relation:2}  {c.threshold:>10.4g}  "
              f"{'PASS' if c.passed else 'FAIL'}")
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="phasepop", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="evolve a scenario and write CSV artifacts")
    p_run.add_argument("config")
    p_ver = sub.add_parser("verify", help="run invariant and oracle checks for a scenario")
    p_ver.add_argument("config")
    p_ver.add_argument("--no-refined", action="store_true", help="skip the doubled-resolution conservation run")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "run":
        return cmd_run(args.config)
    return cmd_verify(args.config, refined=not args.no_refined)


if __name__ == "__main__":
    sys.exit(main())
