"""Richardson time-step study for the competition and biased-migration steppers.

Halves dt three times and prints the ratio of successive differences in the
final state. A ratio near 2 means first order, near 4 second order.
"""
import sys
from pathlib import Path

import numpy as np

from phasepop.config import load_config
from phasepop.coupled import biased_run, competition_run
from phasepop.runner import biased_params, competition_params

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def ratios(final, dts):
    vals = np.array([final(dt) for dt in dts], dtype=float)
    d = np.diff(vals, axis=0)
    return d[:-1] / d[1:]


def main():
    dts = (8e-4, 4e-4, 2e-4, 1e-4)
    comp = load_config(SCENARIOS / "fig3.json")
    bias = load_config(SCENARIOS / "fig6.json")
    for pc in (False, True):
        label = "predictor-corrector" if pc else "explicit"

        def comp_final(dt):
            s = competition_run(comp.u0, comp.grid, competition_params(comp, dt=dt, predictor_corrector=pc),
                                [0.04]).final_state
            return s.xi

        def bias_final(dt):
            return biased_run(bias.u0, bias.grid, biased_params(bias, dt=dt, predictor_corrector=pc),
                              [0.016]).final_state.R

        print(f"competition xi(0.04), {label}: ratios {np.round(ratios(comp_final, dts), 3).tolist()}")
        print(f"biased R(0.016), {label}:      ratios {np.round(ratios(bias_final, dts), 3).tolist()}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
