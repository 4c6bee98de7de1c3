"""Homogeneous two-state mean-field dynamics and its Bloch-sphere image."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.optimize import brentq

from .integrate import NonFiniteStateError, NumericalError, StepSizeError, rk4
from .params import HBAR, InteractionSet

RESOLUTION_GUARD = 0.05
SPHERE_TOL = 1e-12
BLOCH_SUBSTEPS = 8


@dataclass(frozen=True)
class MeanFieldState:
    psi1: complex
    psi0: complex

    @property
    def total_density(self) -> float:
        return abs(self.psi1) ** 2 + abs(self.psi0) ** 2

    def as_array(self) -> np.ndarray:
        return np.array([self.psi1, self.psi0], dtype=complex)


@dataclass(frozen=True)
class BlochVector:
    w: float
    rho10: complex

    def sphere_residual(self) -> float:
        return abs(self.w**2 + 4 * abs(self.rho10) ** 2 - 1.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.rho10.real, self.rho10.imag], dtype=float)

    @classmethod
    def from_angles(cls, theta: float, phi: float) -> "BlochVector":
        """Point on the sphere with w = cos(theta) and 2 rho10 = sin(theta) e^{i phi}."""
        return cls(math.cos(theta), 0.5 * math.sin(theta) * complex(math.cos(phi), math.sin(phi)))


@dataclass
class Trajectory:
    """Uniformly sampled trajectory.

    ``kind == "meanfield"``: ``values[:, 0] = psi1``, ``values[:, 1] = psi0``.
    ``kind == "bloch"``: ``values[:, 0] = w`` (real) and ``values[:, 1] = rho10``.
    ``mu`` is the energy offset the trajectory was generated with; ``stages``
    holds the RK4 substep inputs when requested.
    """

    times: np.ndarray
    values: np.ndarray
    dt: float
    kind: str = "meanfield"
    mu: float = 0.0
    stages: np.ndarray | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def state(self, i: int):
        a, b = self.values[i]
        if self.kind == "bloch":
            return BlochVector(float(a.real), complex(b))
        return MeanFieldState(complex(a), complex(b))

    @property
    def w(self) -> np.ndarray:
        if self.kind == "bloch":
            return self.values[:, 0].real
        n = np.abs(self.values[:, 0]) ** 2 + np.abs(self.values[:, 1]) ** 2
        return (np.abs(self.values[:, 0]) ** 2 - np.abs(self.values[:, 1]) ** 2) / n

    @property
    def rho10(self) -> np.ndarray:
        if self.kind == "bloch":
            return self.values[:, 1]
        n = np.abs(self.values[:, 0]) ** 2 + np.abs(self.values[:, 1]) ** 2
        return self.values[:, 0] * np.conj(self.values[:, 1]) / n


def _check_step(dt: float, rates) -> None:
    if not dt > 0:
        raise StepSizeError(f"dt must be > 0, got {dt}")
    fastest = max(abs(r) for r in rates)
    if dt * fastest > RESOLUTION_GUARD:
        raise StepSizeError(
            f"dt = {dt:.3e} s under-resolves the fastest rate {fastest:.3e} rad/s "
            f"(dt * rate = {dt * fastest:.3g} > {RESOLUTION_GUARD})"
        )


def meanfield_rhs(interactions: InteractionSet, mu: float, omega: float, hbar: float = HBAR):
    """Right-hand side of the homogeneous two-state equations as ``f(t, psi)``."""
    u = interactions.u11
    kappa = interactions.kappa
    hom = hbar * omega

    def f(t, psi):
        p1 = psi[..., 0]
        p0 = psi[..., 1]
        d1 = p1.real**2 + p1.imag**2
        d0 = p0.real**2 + p0.imag**2
        out = np.empty_like(psi)
        out[..., 0] = (-1j / hbar) * ((u * (d1 + d0) - mu) * p1 + hom * p0)
        out[..., 1] = (-1j / hbar) * ((u * (d1 + kappa * d0) - mu) * p0 + hom * p1)
        return out

    return f


def evolve_mean_field(
    initial: MeanFieldState,
    interactions: InteractionSet,
    omega: float,
    mu: float,
    t_final: float,
    dt: float,
    hbar: float = HBAR,
    store_stages: bool = False,
) -> Trajectory:
    """Integrate the homogeneous mean-field equations with fixed-step RK4.

    ``n_steps = round(t_final / dt)`` steps are taken with exactly ``dt``; the
    ``-mu psi`` terms are included so the caller can cancel the global phase.
    """
    n_tot = initial.total_density
    g = n_tot * interactions.u11 * (1 - interactions.kappa) / hbar
    _check_step(dt, (g, omega, mu / hbar, n_tot * interactions.u11 / hbar))
    n_steps = max(1, int(round(t_final / dt)))
    f = meanfield_rhs(interactions, mu, omega, hbar)
    out = rk4(f, initial.as_array(), dt, n_steps, store_stages=store_stages)
    stages = out[2] if store_stages else None
    return Trajectory(out[0], out[1], dt, kind="meanfield", mu=mu, stages=stages,
                      meta={"omega": omega, "kappa": interactions.kappa, "u": interactions.u11})


def bloch_rhs(g: float, omega: float):
    """Nonlinear Bloch equations on the real vector (w, Re rho10, Im rho10)."""

    def f(t, y):
        w = y[..., 0]
        x = y[..., 1]
        v = y[..., 2]
        a = 0.5 * g * (1.0 - w)
        out = np.empty_like(y)
        # d rho/dt = -i a rho + i omega w
        out[..., 0] = -4.0 * omega * v
        out[..., 1] = a * v
        out[..., 2] = -a * x + omega * w
        return out

    return f


@numba.njit(cache=True)
def _bloch_rk4(y0, g, omega, h, n_out, substeps):
    """Classical RK4 with ``substeps`` steps of size ``h`` between stored samples.

    ``y0`` has shape (m, 3); returns (n_out + 1, m, 3).
    """
    m = y0.shape[0]
    out = np.empty((n_out + 1, m, 3))
    out[0] = y0
    for j in range(m):
        w, x, v = y0[j, 0], y0[j, 1], y0[j, 2]
        for i in range(n_out):
            for _ in range(substeps):
                a = 0.5 * g * (1.0 - w)
                k1w, k1x, k1v = -4.0 * omega * v, a * v, -a * x + omega * w
                w2, x2, v2 = w + 0.5 * h * k1w, x + 0.5 * h * k1x, v + 0.5 * h * k1v
                a = 0.5 * g * (1.0 - w2)
                k2w, k2x, k2v = -4.0 * omega * v2, a * v2, -a * x2 + omega * w2
                w3, x3, v3 = w + 0.5 * h * k2w, x + 0.5 * h * k2x, v + 0.5 * h * k2v
                a = 0.5 * g * (1.0 - w3)
                k3w, k3x, k3v = -4.0 * omega * v3, a * v3, -a * x3 + omega * w3
                w4, x4, v4 = w + h * k3w, x + h * k3x, v + h * k3v
                a = 0.5 * g * (1.0 - w4)
                k4w, k4x, k4v = -4.0 * omega * v4, a * v4, -a * x4 + omega * w4
                w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
                x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
                v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            out[i + 1, j, 0] = w
            out[i + 1, j, 1] = x
            out[i + 1, j, 2] = v
    return out


def evolve_bloch(initial, g: float, omega: float, t_final: float, dt: float,
                 substeps: int = BLOCH_SUBSTEPS) -> Trajectory:
    """Integrate the nonlinear Bloch equations.

    ``initial`` may be a :class:`BlochVector` or an ``(m, 3)`` array of
    ``(w, Re rho10, Im rho10)`` rows, integrated together; batched input
    returns a trajectory with ``values`` of shape ``(nt, m, 2)``.

    Samples are stored every ``dt``; each sample interval is covered by
    ``substeps`` classical RK4 steps. At the resolution guard a single step
    drifts off the sphere by ~1e-6 per ten Rabi periods, while eight
    substeps keep both quadratic invariants (sphere identity and energy)
    below 1e-8 over hundreds of periods.
    """
    if isinstance(initial, BlochVector):
        y0 = initial.as_array()
    else:
        y0 = np.asarray(initial, dtype=float)
    resid = np.abs(y0[..., 0] ** 2 + 4 * (y0[..., 1] ** 2 + y0[..., 2] ** 2) - 1.0)
    if np.any(resid > SPHERE_TOL):
        raise ValueError(f"initial state off the Bloch sphere (residual {resid.max():.2e})")
    _check_step(dt, (g, omega))
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    n_steps = max(1, int(round(t_final / dt)))
    ys = _bloch_rk4(np.ascontiguousarray(np.atleast_2d(y0)), float(g), float(omega), dt / substeps,
                    n_steps, int(substeps))
    if not np.all(np.isfinite(ys)):
        bad = int(np.argmax(~np.all(np.isfinite(ys.reshape(len(ys), -1)), axis=1)))
        raise NonFiniteStateError(bad * dt)
    if y0.ndim == 1:
        ys = ys[:, 0, :]
    times = dt * np.arange(n_steps + 1)
    values = np.stack([ys[..., 0] + 0j, ys[..., 1] + 1j * ys[..., 2]], axis=-1)
    return Trajectory(times, values, dt, kind="bloch",
                      meta={"g": g, "omega": omega, "substeps": substeps})


def energy_per_particle(state: BlochVector, g: float, omega: float, hbar: float = HBAR) -> float:
    """E = -(hbar g / 8)(1 - w)^2 + 2 hbar Omega Re(rho10)."""
    return -0.125 * hbar * g * (1.0 - state.w) ** 2 + 2.0 * hbar * omega * state.rho10.real


def energy_series(traj: Trajectory, g: float, omega: float, hbar: float = HBAR) -> np.ndarray:
    w = traj.w
    return -0.125 * hbar * g * (1.0 - w) ** 2 + 2.0 * hbar * omega * traj.rho10.real


def bloch_from_meanfield(state: MeanFieldState) -> BlochVector:
    n = state.total_density
    if n <= 0:
        raise ValueError("zero total density has no Bloch-sphere image")
    w = (abs(state.psi1) ** 2 - abs(state.psi0) ** 2) / n
    return BlochVector(w, state.psi1 * state.psi0.conjugate() / n)


def kappa1_solution(initial: MeanFieldState, u: float, mu: float, omega: float, t,
                    hbar: float = HBAR) -> np.ndarray:
    """Closed-form kappa = 1 evolution, shape ``(len(t), 2)``.

    With mu = n U, psi1 = cos(Omega t) Phi+ + sin(Omega t) Phi- and
    psi0 = -i sin(Omega t) Phi+ + i cos(Omega t) Phi-; any other mu adds the
    global phase exp(-i (n U - mu) t / hbar).
    """
    t = np.asarray(t, dtype=float)
    phi_p = initial.psi1
    phi_m = -1j * initial.psi0
    c = np.cos(omega * t)
    s = np.sin(omega * t)
    phase = np.exp(-1j * (initial.total_density * u - mu) * t / hbar)
    out = np.empty(t.shape + (2,), dtype=complex)
    out[..., 0] = (c * phi_p + s * phi_m) * phase
    out[..., 1] = (-1j * s * phi_p + 1j * c * phi_m) * phase
    return out


# ---------------------------------------------------------------------------
# Fixed points of the Bloch flow
# ---------------------------------------------------------------------------


class FixedPointError(NumericalError):
    pass


@dataclass(frozen=True)
class FixedPoint:
    s: float
    theta: float
    lin_eigenvalues: tuple[complex, complex]

    @property
    def bloch(self) -> BlochVector:
        return BlochVector.from_angles(self.theta, 0.0)


def fixed_point_residual(s: float, g: float, omega: float) -> float:
    """Relative residual of g s^3 = Omega (1 - s^4)."""
    scale = abs(g * s**3) + abs(omega) * (1 + s**4)
    return abs(g * s**3 - omega * (1 - s**4)) / scale


def find_fixed_points(g: float, omega: float, n_grid: int = 20001) -> list[FixedPoint]:
    """All real roots of g s^3 = Omega (1 - s^4) with s = tan(theta / 2).

    Roots are bracketed by a sign-change scan over [-S, S] with
    S = 10 max(1, |g| / Omega) and then polished with Brent's method.
    """
    if not omega > 0:
        raise ValueError("omega must be > 0")
    span = 10.0 * max(1.0, abs(g) / omega)

    def poly(s):
        return g * s**3 - omega * (1.0 - s**4)

    grid = np.linspace(-span, span, n_grid)
    vals = poly(grid)
    if vals[0] <= 0 or vals[-1] <= 0:
        raise FixedPointError(f"scan bounds [-{span:g}, {span:g}] do not bracket the outer roots")
    roots = []
    for i in range(n_grid - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(float(grid[i]))
        elif a * b < 0:
            roots.append(brentq(poly, grid[i], grid[i + 1], xtol=1e-300, rtol=4 * np.finfo(float).eps,
                                maxiter=500))
    if not roots:
        raise FixedPointError(f"no sign change found in [-{span:g}, {span:g}]")
    out = []
    for s in roots:
        lam = np.sqrt(complex(-(omega**2) * (s**4 + 3.0) / s**2))
        out.append(FixedPoint(s=s, theta=2.0 * math.atan(s), lin_eigenvalues=(lam, -lam)))
    return out


@dataclass(frozen=True)
class FixedPointReport:
    worst_real_part: float
    omega: float
    passed: bool
    worst_root: float | None


def verify_no_attracting_fixed_points(fixed_points, omega: float, rel_tol: float = 1e-10):
    """Check every linearisation eigenvalue is purely imaginary.

    Raises ``AssertionError`` naming the offending root; otherwise returns a
    report with the worst |Re(lambda)|.
    """
    worst = 0.0
    worst_root = None
    for fp in fixed_points:
        re = max(abs(complex(lam).real) for lam in fp.lin_eigenvalues)
        if re >= worst:
            worst, worst_root = re, fp.s
        if re >= rel_tol * omega:
            raise AssertionError(
                f"fixed point s = {fp.s!r} has |Re lambda| = {re:.3e} >= {rel_tol:g} * Omega"
            )
    return FixedPointReport(worst, omega, True, worst_root)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def write_trajectory_csv(traj: Trajectory, path, params: dict | None = None, header_lines=()) -> None:
    """CSV with a ``#`` comment header (parameter echo) and one row per sample."""
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        for key, value in (params or {}).items():
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        if traj.kind == "bloch":
            writer.writerow(["t", "w", "re_rho10", "im_rho10"])
            cols = (traj.values[:, 0].real, traj.values[:, 1].real, traj.values[:, 1].imag)
        else:
            writer.writerow(["t", "re_psi1", "im_psi1", "re_psi0", "im_psi0"])
            cols = (traj.values[:, 0].real, traj.values[:, 0].imag,
                    traj.values[:, 1].real, traj.values[:, 1].imag)
        for i, t in enumerate(traj.times):
            writer.writerow([format_float(t)] + [format_float(c[i]) for c in cols])


def format_float(x: float) -> str:
    """Fixed float format used for every CSV value (byte-stable across runs)."""
    return f"{float(x):.12e}"
