"""The Brownian bridge between grid points and the integral that no method can see.

Given W on [0, T] and B only at the knots, the part of int B dW driven by
the bridge B - Bbar is invisible.  Its dyadic approximation I^n has the same
law as G * sqrt(int |Bcirc|^2), and sqrt(N) E|I^n| / T sits between the
floor 1/4 and the Gaussian ceiling sqrt(2/pi)/sqrt(6).

    python demos/bridge_identity.py --paths 20000
"""

import argparse
import math

import numpy as np

from heston_barrier_lab import bridge_lab as bl
from heston_barrier_lab import grid_paths as gp

parser = argparse.ArgumentParser()
parser.add_argument("--paths", type=int, default=10_000)
parser.add_argument("--seed", type=int, default=3)
args = parser.parse_args()

# pointwise second moment and its square-root integral
grid = gp.make_grid(1.0, 4)
prof = bl.bridge_l2_profile(grid)
t = np.linspace(0, 0.25, 6)
print("E|Bcirc_t|^2 on the first cell:", np.round(prof.pointwise(t), 5))
print(f"int sqrt(E|Bcirc|^2): closed form {prof.integral_of_sqrt:.15f}, "
      f"quadrature {prof.integral_quadrature:.15f}, pi/16 = {math.pi / 16:.15f}")

print(f"\n{'N':>4} {'n':>3} {'KS':>7} {'crit 1%':>8} {'sqrt(N)E|I|/T':>14} {'+-':>7}")
for N, n in [(2, 8), (8, 8), (32, 6), (64, 6)]:
    d = bl.distribution_identity_test(args.paths, N, n, args.seed)
    print(f"{N:4d} {n:3d} {d.ks_stat:7.4f} {bl.ks_critical(args.paths):8.4f} "
          f"{d.scaled_mean:14.4f} {d.scaled_se:7.4f}")
print(f"bracket: [{bl.JENSEN_FLOOR}, {bl.LYAPUNOV_CEILING:.4f}]")

# the dyadic approximation converges at rate 2^-n in mean square
gc, gf = gp.make_grid(1.0, 4), gp.make_grid(1.0, 4 * 2**10)
dW, dB = gp.increments(gf, range(1000), args.seed)
ens = bl.bridge_decompose(gp.cumulative(dB), gc, gf, gp.cumulative(dW))
levels = {k: bl.iterated_integral_dyadic(ens, level=k) for k in range(3, 11)}
print("\nE|I^{n+1} - I^n|^2:")
for k in range(3, 10):
    print(f"  n={k}: {np.mean((levels[k + 1] - levels[k]) ** 2):.3e}")
