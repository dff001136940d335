"""Follow the self-interaction fixed point forward in time until it breaks down.

Prints iteration count, final mismatch and the steepest marginal gradient at
each time, warm-starting every solve from the previous one.
"""
import argparse
import sys
from pathlib import Path

import numpy as np

from phasepop.config import load_config
from phasepop.grid import marginal_over_params
from phasepop.runner import self_interaction_config
from phasepop.self_interaction import time_sweep

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--step", type=float, default=0.01)
    ap.add_argument("--until", type=float, default=0.15)
    args = ap.parse_args(argv)
    cfg = load_config(SCENARIOS / "fig7.json")
    times = np.round(np.arange(0.0, args.until + 0.5 * args.step, args.step), 10)
    h = cfg.grid.axis("n").spacing
    print(f"{'t':>6} {'converged':>9} {'iters':>6} {'mismatch':>10} {'steepest':>10}")
    for u, r in time_sweep(cfg.u0, cfg.grid, times, self_interaction_config(cfg)):
        grad = np.max(np.abs(np.diff(marginal_over_params(u).values))) / h
        print(f"{r.t:>6.3f} {str(r.converged):>9} {r.iterations:>6} {r.final_mismatch:>10.2e} {grad:>10.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
