"""Reference suites shared by the unit tests and the acceptance module.

Every check here recomputes its expectation independently of the code
path under test (re-integration, closed forms, brute-force scans).
"""

import itertools
import math

import numpy as np

from bec_floquet.floquet import kappa1_spectrum, kinetic_energy
from bec_floquet.meanfield import (
    RESOLUTION_GUARD,
    BlochVector,
    Trajectory,
    energy_series,
    evolve_bloch,
    find_fixed_points,
    fixed_point_residual,
)
from bec_floquet.params import HBAR
from bec_floquet.period import detect_period

OMEGA = 2 * math.pi * 1000.0
# record lengths in units of pi / Omega; each spans more than 50 periods of
# the slowest orbit in the state grid below
RECORD_LENGTH = {0: 60, 1: 60, 8: 30, 100: 15}


def bloch_state_grid(n_theta=6, n_phi=4):
    """n_theta x n_phi points on the sphere away from the poles."""
    thetas = np.linspace(0.15, math.pi - 0.15, n_theta)
    phis = np.linspace(0, 2 * math.pi, n_phi, endpoint=False)
    return np.array([BlochVector.from_angles(t, p).as_array() for t in thetas for p in phis])


def sphere_distance(a, b):
    """Euclidean distance of two (w, Re rho10, Im rho10) rows on the unit sphere."""
    scale = np.array([1.0, 2.0, 2.0])
    return float(np.linalg.norm(scale * (np.asarray(a) - np.asarray(b))))


def bloch_periodicity(ratio, states=None, omega=OMEGA):
    """Return-to-start distance, energy drift (units hbar Omega) and sphere drift.

    Each state's period is detected from a long guard-step record; the state
    is then re-integrated from its start over exactly one detected period.
    """
    states = bloch_state_grid() if states is None else states
    g = ratio * omega
    dt = RESOLUTION_GUARD / max(abs(g), omega)
    traj = evolve_bloch(states, g, omega, RECORD_LENGTH.get(ratio, 60) * math.pi / omega, dt)
    worst_return = 0.0
    periods = []
    for j, start in enumerate(states):
        sub = Trajectory(traj.times, traj.values[:, j, :], dt, kind="bloch")
        est = detect_period(sub)
        periods.append(est.T)
        n = math.ceil(est.T / dt)
        end = evolve_bloch(start, g, omega, est.T, est.T / n).values[-1]
        end = np.array([end[0].real, end[1].real, end[1].imag])
        worst_return = max(worst_return, sphere_distance(end, start))
    w = traj.values[..., 0].real
    rho = traj.values[..., 1]
    energy = -0.125 * HBAR * g * (1 - w) ** 2 + 2 * HBAR * omega * rho.real
    energy_drift = float(np.max(np.abs(energy - energy[0]))) / (HBAR * omega)
    sphere_drift = float(np.max(np.abs(w**2 + 4 * np.abs(rho) ** 2 - 1)))
    return {"return": worst_return, "energy": energy_drift, "sphere": sphere_drift,
            "periods": np.array(periods)}


def energy_drift_single(traj: Trajectory, g, omega):
    e = energy_series(traj, g, omega)
    return float(np.max(np.abs(e - e[0]))) / (HBAR * omega)


def fixed_point_suite(ratios=(0.0, 0.25, 1.0, 8.0, 100.0, -1.0, -8.0), omega=OMEGA):
    """Worst relative root residual, worst |Re lambda| / Omega and the g = 0 root error."""
    worst_res = 0.0
    worst_re = 0.0
    for r in ratios:
        for fp in find_fixed_points(r * omega, omega):
            worst_res = max(worst_res, fixed_point_residual(fp.s, r * omega, omega))
            worst_re = max(worst_re, max(abs(complex(x).real) for x in fp.lin_eigenvalues) / omega)
    roots0 = sorted(fp.s for fp in find_fixed_points(0.0, omega))
    g0_error = max(abs(roots0[0] + 1.0), abs(roots0[1] - 1.0)) if len(roots0) == 2 else math.inf
    return {"residual": worst_res, "real_part": worst_re, "g0_root_error": g0_error,
            "g0_roots": roots0}


def dense_grid_roots(ratio, n=1_000_001, span=None):
    """Brute-force sign-change scan of ratio s^3 - (1 - s^4); midpoints of the bracketing cells."""
    span = span or 10.0 * max(1.0, abs(ratio))
    s = np.linspace(-span, span, n)
    p = ratio * s**3 - (1 - s**4)
    idx = np.flatnonzero(np.sign(p[:-1]) * np.sign(p[1:]) < 0)
    return 0.5 * (s[idx] + s[idx + 1]), s[1] - s[0]


def kappa1_reference(k, n, u, mass, period, hbar=HBAR):
    """Folded angular frequencies expected for kappa = 1: +-omega_up and +-omega_down."""
    up, down = kappa1_spectrum(k, n, u, mass, hbar)
    w = 2 * math.pi / period
    raw = np.stack([up, -up, down, -down], axis=-1)
    return np.mod(raw + 0.5 * w, w) - 0.5 * w


def folded_distance(a, b, period):
    """Distance between angular frequencies on the circle of circumference 2 pi / T."""
    w = 2 * math.pi / period
    d = np.mod(np.asarray(a) - np.asarray(b) + 0.5 * w, w) - 0.5 * w
    return np.abs(d)


def kappa1_omega_error(spectrum, n, u, mass):
    """Worst relative error of the folded scan frequencies against the kappa = 1 closed form.

    Each row's four exponents are matched to the four reference values by
    sorting; the error is taken relative to the fold width 2 pi nu0 because
    folded frequencies near zero have no scale of their own.
    """
    period = spectrum.period
    ref = kappa1_reference(spectrum.k_grid, n, u, mass, period)
    worst = 0.0
    for row, exp in zip(ref, spectrum.omega):
        best = min(
            float(np.max(folded_distance(exp, row[list(p)], period)))
            for p in itertools.permutations(range(4))
        )
        worst = max(worst, best)
    return worst / (2 * math.pi / period)


def free_particle_omega(k, mass, hbar=HBAR):
    return kinetic_energy(k, mass, hbar) / hbar
