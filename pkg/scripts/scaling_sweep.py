"""Narrowing bump kernels against the contact-interaction minimizer."""

import argparse
import time

from mfergodic.grid import UniformGrid
from mfergodic.potentials import bump_kernel, polynomial
from mfergodic.scaling import ScalingScenario, scaling_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--beta", type=float, nargs="+", default=[0.2, 0.5])
    ap.add_argument("--N", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--width", type=float, default=5.0)
    ap.add_argument("--points", type=int, default=33)
    args = ap.parse_args()

    grid = UniformGrid.line(-6.0, 6.0, args.points)
    t0 = time.perf_counter()
    res = scaling_sweep(ScalingScenario(args.beta, args.N, bump_kernel(args.width)), grid, polynomial([0.0, 1.0]))
    print(f"contact limit: E_delta={res.local.E:.8f}")
    print(f"{'beta':>5} {'N':>2} {'E_N':>12} {'|gap|':>10} {'L1 gap':>10} {'mass err':>9}")
    for c in res.cells:
        print(f"{c.beta:5.2f} {c.N:2d} {c.E_N:12.8f} {c.energy_gap:10.3e} {c.marginal_L1_gap:10.3e} {c.kernel_mass_error:9.1e}")
    for beta, flags in res.trends().items():
        print(f"beta={beta}: {flags}")
    print(f"wall {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
