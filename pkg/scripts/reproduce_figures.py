"""Run every shipped scenario and write its CSV artifacts under out/<name>/.

Usage: python scripts/reproduce_figures.py [--oracle] [name ...]
"""
import argparse
import sys
import time
from pathlib import Path

from phasepop.config import load_config
from phasepop.runner import run_oracle, run_scenario, write_artifacts

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help="scenario names (default: all)")
    ap.add_argument("--oracle", action="store_true", help="also run the ensemble oracle")
    ap.add_argument("--out", default="out", help="output root")
    args = ap.parse_args(argv)
    names = args.names or sorted(p.stem for p in SCENARIOS.glob("*.json"))
    print(f"{'scenario':<8} {'model':<18} {'snapshots':>9} {'drift':>10} {'max L1':>8} {'secs':>6}")
    for name in names:
        cfg = load_config(SCENARIOS / f"{name}.json")
        start = time.perf_counter()
        result = run_scenario(cfg)
        oracle = run_oracle(result) if args.oracle and result.fields else None
        write_artifacts(result, Path(args.out) / name, oracle)
        l1 = f"{max(oracle.l1):.4f}" if oracle else "-"
        print(f"{name:<8} {cfg.model:<18} {len(result.fields):>9} {result.mass_drift:>10.2e} {l1:>8} "
              f"{time.perf_counter() - start:>6.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
