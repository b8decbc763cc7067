"""Ballistic to diffusive crossover of a dephased single magnon on a long chain."""
import argparse
from pathlib import Path

import numpy as np

from rydmagnon.dynamics import hrs_msd
from rydmagnon.observables import log_slope
from rydmagnon.plotting import line_plot


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/hrs"))
    ap.add_argument("--sites", type=int, default=101)
    ap.add_argument("--j", type=float, default=0.8, help="hopping in rad/us")
    ap.add_argument("--gammas-mhz", type=float, nargs="+", default=[0.2, 0.5, 1.0])
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    msd, slopes = [], []
    for g_mhz in args.gammas_mhz:
        gamma = 2 * np.pi * g_mhz
        t = np.geomspace(0.01, 30, 80) / gamma
        x2 = hrs_msd(args.sites, args.j, gamma, t, step_fraction=0.05)
        s = log_slope(t, x2)
        label = f"gamma/2pi = {g_mhz} MHz"
        msd.append({"x": np.log10(t * gamma), "y": np.log10(x2), "label": label})
        slopes.append({"x": np.log10(t * gamma), "y": s, "label": label})
        print(f"{label}: slope {s[0]:.3f} early, {s[-1]:.3f} late, max <x^2> {x2.max():.1f}")
    line_plot(args.out / "msd.svg", msd, title="log10 <x^2>", xlabel="log10(gamma t)", ylabel="log10 <x^2>")
    line_plot(args.out / "slope.svg", slopes, title="local exponent", xlabel="log10(gamma t)",
              ylabel="d log<x^2> / d log t", ylim=(0.5, 2.2))


if __name__ == "__main__":
    main()
