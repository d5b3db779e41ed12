"""Energy gap, entropy per particle and drift discrepancy for N = 2, 3, 4."""

import argparse
import time
import warnings

from mfergodic.diagnostics import nparticle_row
from mfergodic.grid import UniformGrid
from mfergodic.meanfield import solve_ground_state
from mfergodic.nparticle import solve_linear_ground_state
from mfergodic.potentials import MeanFieldPotential, gaussian_kernel, polynomial


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--g", type=float, default=0.5)
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--extent", type=float, default=6.0)
    ap.add_argument("--points", type=int, default=33)
    ap.add_argument("--N", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--T", type=float, default=1.0)
    args = ap.parse_args()

    grid = UniformGrid.line(-args.extent, args.extent, args.points)
    pot = MeanFieldPotential.build(grid, polynomial([0.0, 1.0]), v1=gaussian_kernel(args.sigma), g=args.g)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        mf = solve_ground_state(pot)
    print(f"mean field: E={mf.E:.10f} mu0={mf.mu0:.10f} residual={mf.residual_norm:.1e}")
    print(f"{'N':>2} {'E - E_N':>10} {'H/N':>10} {'D_N':>10} {'D formula':>10} {'path H':>10} {'TV':>9} {'W1':>9} {'sec':>6}")
    for N in args.N:
        t0 = time.perf_counter()
        st = solve_linear_ground_state(pot, N, warm_start=mf)
        row = nparticle_row(st, mf, pot, T=args.T)
        print(
            f"{N:2d} {mf.E - st.E_N:10.3e} {row.entropy_per_particle:10.3e} {row.drift_discrepancy:10.3e} "
            f"{row.extra['drift_formula']:10.3e} {row.path_entropy:10.3e} {row.marginal_TV:9.2e} "
            f"{row.marginal_W1:9.2e} {time.perf_counter() - t0:6.1f}"
        )


if __name__ == "__main__":
    main()
