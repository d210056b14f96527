"""Energy/momentum drift and closure error of the figure-eight against rtol.

Usage: python3 scripts/conservation_ladder.py [--periods N]
"""

import argparse

from syzygy.integrator import IntegratorConfig, drift_report, integrate
from syzygy.orbits import figure_eight, state_distance


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--periods", type=int, default=10)
    args = ap.parse_args()
    f8 = figure_eight()
    print(f"{'rtol':>8} {'steps':>7} {'|dH/H|':>10} {'|dI|':>10} {'closure':>10}")
    for rtol in (1e-6, 1e-8, 1e-10, 1e-11, 1e-12, 1e-13):
        cfg = IntegratorConfig(rtol=rtol, atol=rtol * 1e-2)
        traj = integrate(f8.masses, f8.state, args.periods * f8.period, cfg)
        e, i = drift_report(traj)
        closure = state_distance(f8.state.flat(), traj.ys[-1])
        print(f"{rtol:8.0e} {traj.n_steps:7d} {e:10.2e} {i:10.2e} {closure:10.2e}")


if __name__ == "__main__":
    main()
