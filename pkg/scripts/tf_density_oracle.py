"""Independent Thomas-Fermi peak density for the He* trap.

Integrates the Thomas-Fermi profile n(r, z) = max(0, mu - V) / U11 of an
N-atom condensate numerically over the trap and solves N(mu) = N with a
bracketing root finder, without using the closed-form chemical potential.
The printed density is frozen as a golden constant in the test suite.

Usage: python scripts/tf_density_oracle.py
"""

import math

from scipy.integrate import dblquad
from scipy.optimize import brentq

HBAR = 1.054571817e-34
MASS = 6.6465e-27
N_ATOMS = 2.0e6
OMEGA_R = 2 * math.pi * 1020.0
OMEGA_Z = 2 * math.pi * 55.0
A11 = 7.51e-9

U11 = 4 * math.pi * HBAR**2 * A11 / MASS


def atom_number(mu):
    """N(mu) by direct quadrature of the Thomas-Fermi profile in cylindrical coordinates."""
    r_max = math.sqrt(2 * mu / (MASS * OMEGA_R**2))
    z_max = math.sqrt(2 * mu / (MASS * OMEGA_Z**2))

    def integrand(r, z):
        v = 0.5 * MASS * (OMEGA_R**2 * r * r + OMEGA_Z**2 * z * z)
        return max(0.0, mu - v) / U11 * 2 * math.pi * r

    def r_edge(z):
        return math.sqrt(max(0.0, 2 * (mu - 0.5 * MASS * OMEGA_Z**2 * z * z) / (MASS * OMEGA_R**2)))

    half, _ = dblquad(integrand, 0.0, z_max, 0.0, r_edge, epsabs=0.0, epsrel=1e-12)
    return 2 * half


def main():
    scale = HBAR * OMEGA_R
    mu = brentq(lambda m: atom_number(m * scale) - N_ATOMS, 1.0, 1e4, xtol=1e-14, rtol=1e-14) * scale
    n_peak = mu / U11
    print(f"mu_tf = {mu:.12e} J  ({mu / (2 * math.pi * HBAR):.6f} Hz)")
    print(f"n_peak = {n_peak:.12e} m^-3")
    print(f"nU/h = {n_peak * U11 / (2 * math.pi * HBAR):.6f} Hz")


if __name__ == "__main__":
    main()
