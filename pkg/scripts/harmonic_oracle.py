"""Grid-refinement study of the harmonic trap against the closed-form ground state."""

import argparse
import math

from mfergodic.diagnostics import l1_distance
from mfergodic.grid import DensityField, UniformGrid
from mfergodic.meanfield import solve_ground_state
from mfergodic.potentials import MeanFieldPotential, polynomial


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--extent", type=float, default=8.0)
    ap.add_argument("--points", type=int, nargs="+", default=[65, 129, 257, 513, 1025, 2049])
    args = ap.parse_args()

    s2 = math.sqrt(2.0)
    print(f"{'points':>7} {'h':>9} {'J - sqrt2':>11} {'mu0 - 2sqrt2':>13} {'L1':>10} {'order':>6}")
    prev = None
    for n in args.points:
        grid = UniformGrid.line(-args.extent, args.extent, n)
        st = solve_ground_state(MeanFieldPotential.build(grid, polynomial([0.0, 1.0])))
        x = grid.coords()
        ref = DensityField.normalized(grid, [math.exp(-s2 * t * t / 2) for t in x])
        err = st.E - s2
        order = math.log2(abs(prev / err)) if prev else float("nan")
        print(
            f"{n:7d} {grid.spacing[0]:9.4f} {err:11.3e} {st.mu0 - 2 * s2:13.3e} "
            f"{l1_distance(st.rho0, ref):10.3e} {order:6.2f}"
        )
        prev = err


if __name__ == "__main__":
    main()
