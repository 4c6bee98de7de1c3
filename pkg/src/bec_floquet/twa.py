"""1D homogeneous truncated-Wigner ensembles of the two-state field equations.

Each realization is a pair of c-number fields on a periodic lattice, seeded
with a coherent background plus half a quantum of Gaussian vacuum noise per
mode and evolved with a symmetric split-step scheme. Ensemble averages of
``|psi(k)|^2`` minus the half quantum give mode occupations whose
exponential growth is compared with Floquet exponents.

FFT convention: ``psi_k = sqrt(dx / N) * fft(psi)`` so that
``sum_k |psi_k|^2 = sum_x |psi_x|^2 dx`` is the atom number on the lattice.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.fft

from .integrate import NonFiniteStateError, NumericalError, StepSizeError
from .meanfield import format_float
from .params import HBAR, BackgroundDensity, InteractionSet, PhysicalConfig, thomas_fermi_radii

KINETIC_BOUND = 0.1
PHASE_BOUND = 0.1
NOISE_FLOOR = 0.5  # occupation of half a quantum per mode
CHUNK_SIZE = 25


class WindowError(NumericalError):
    """No usable fit window: the mode never leaves the noise floor or saturates at once."""


@dataclass(frozen=True)
class Lattice1D:
    n_points: int
    length: float

    def __post_init__(self):
        if self.n_points < 2 or self.n_points & (self.n_points - 1):
            raise ValueError(f"n_points must be a power of two, got {self.n_points}")
        if not self.length > 0:
            raise ValueError("length must be > 0")

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def k_values(self) -> np.ndarray:
        """Wave numbers in FFT order (0, dk, ..., -dk)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.length

    @property
    def k_max(self) -> float:
        return np.pi / self.dx

    def index_of(self, k: float) -> int:
        """FFT-order index of the bin nearest the wave number ``k``."""
        return int(np.argmin(np.abs(self.k_values - k)))


@dataclass
class WignerField:
    """Lattice fields (m^-1/2); shape ``(N,)`` or ``(R, N)`` for R realizations."""

    psi1: np.ndarray
    psi0: np.ndarray
    seed: int | None = None

    def atom_number(self, dx: float) -> np.ndarray:
        return (np.sum(np.abs(self.psi1) ** 2, axis=-1) + np.sum(np.abs(self.psi0) ** 2, axis=-1)) * dx

    def copy(self) -> "WignerField":
        return WignerField(self.psi1.copy(), self.psi0.copy(), self.seed)


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for trajectory ``index`` of master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def sample_initial_field(lattice: Lattice1D, n1d: float, population_split: float = 1.0,
                         seed: int = 0, index: int = 0, noise: bool = True) -> WignerField:
    """Coherent background sqrt(n1d * split_j) plus vacuum noise.

    The noise is complex Gaussian with ``<|delta psi|^2> = 1 / (2 dx)`` per
    site and component, i.e. half a quantum per lattice mode.
    """
    if not n1d > 0:
        raise ValueError("n1d must be > 0")
    if not 0.0 <= population_split <= 1.0:
        raise ValueError("population_split must lie in [0, 1]")
    n = lattice.n_points
    psi1 = np.full(n, math.sqrt(n1d * population_split), dtype=complex)
    psi0 = np.full(n, math.sqrt(n1d * (1.0 - population_split)), dtype=complex)
    if noise:
        rng = trajectory_rng(seed, index)
        sigma = math.sqrt(0.25 / lattice.dx)  # per real quadrature
        z = rng.standard_normal((4, n)) * sigma
        psi1 += z[0] + 1j * z[1]
        psi0 += z[2] + 1j * z[3]
    return WignerField(psi1, psi0, seed)


def one_d_reduction(config: PhysicalConfig, interactions: InteractionSet, background: BackgroundDensity,
                    area: float | None = None) -> tuple[float, InteractionSet, float]:
    """(n1d, 1D interactions, area) with n1d = n A and U1D = U / A, keeping n U and g fixed.

    ``area`` defaults to pi R_r^2 / 2, the density-weighted cross-section of a
    Thomas-Fermi profile with radial radius R_r.
    """
    if area is None:
        r_r, _ = thomas_fermi_radii(config, background)
        area = 0.5 * math.pi * r_r**2
    if not area > 0:
        raise ValueError("area must be > 0")
    inter1d = InteractionSet(interactions.u11 / area, interactions.u10 / area, interactions.u00 / area,
                             interactions.kappa)
    return background.n * area, inter1d, area


def max_stable_dt(lattice: Lattice1D, mass: float, hbar: float = HBAR) -> float:
    """Largest dt with dt * hbar k_max^2 / 2M <= KINETIC_BOUND."""
    return KINETIC_BOUND * 2.0 * mass / (hbar * lattice.k_max**2)


def choose_dt(lattice: Lattice1D, interactions: InteractionSet, n1d: float, omega: float, mass: float,
              save_interval: float, hbar: float = HBAR) -> float:
    """Largest step within the kinetic and phase bounds that divides ``save_interval``."""
    rate = max(omega, n1d * interactions.u11 / hbar)
    dt = min(max_stable_dt(lattice, mass, hbar), PHASE_BOUND / rate)
    return save_interval / math.ceil(save_interval / dt * (1 - 1e-12))


@numba.njit(cache=True, nogil=True)
def _potential_step(p1, p0, a11, a10, a00, shift1, shift0, c, s):
    """In place: R(dt/2) N(dt) R(dt/2); a_ij = U_ij dt / hbar, shifts include -mu.

    R is the exact Rabi rotation (c, s) = (cos, sin)(Omega dt / 2) and N the
    local interaction phase, both unitary per site.
    """
    rows, cols = p1.shape
    for r in range(rows):
        for j in range(cols):
            x1 = p1[r, j]
            x0 = p0[r, j]
            y1 = c * x1 - 1j * s * x0
            y0 = c * x0 - 1j * s * x1
            d1 = y1.real * y1.real + y1.imag * y1.imag
            d0 = y0.real * y0.real + y0.imag * y0.imag
            t1 = a11 * d1 + a10 * d0 - shift1
            t0 = a10 * d1 + a00 * d0 - shift0
            y1 = y1 * complex(math.cos(t1), -math.sin(t1))
            y0 = y0 * complex(math.cos(t0), -math.sin(t0))
            p1[r, j] = c * y1 - 1j * s * y0
            p0[r, j] = c * y0 - 1j * s * y1


def evolve_twa(field: WignerField, lattice: Lattice1D, interactions: InteractionSet, omega: float,
               mu: float, t_final: float, dt: float, mass: float, hbar: float = HBAR,
               save_every: int | None = None, wigner_shift: bool = True):
    """Split-step evolution; yields ``(t, WignerField)`` at t = 0 and every ``save_every`` steps.

    One step is ``K(dt/2) [R(dt/2) N(dt) R(dt/2)] K(dt/2)`` with K the kinetic
    propagator in k space, N the local interaction phase (including -mu) and
    R the exact Rabi rotation; adjacent kinetic half-steps are merged. With
    ``wigner_shift`` the interaction energy is corrected for the symmetric
    ordering of the noise (U/dx self term, U/2dx cross term), so the
    ensemble-mean background follows the mean-field equations.

    Raises
    ------
    StepSizeError
        ``dt * hbar k_max^2 / 2M > KINETIC_BOUND``.
    NonFiniteStateError
        A field entry became non-finite.
    """
    if not dt > 0:
        raise StepSizeError("dt must be > 0")
    kin = dt * hbar * lattice.k_max**2 / (2.0 * mass)
    if kin > KINETIC_BOUND * (1 + 1e-12):
        raise StepSizeError(f"dt * hbar k_max^2 / 2M = {kin:.3g} exceeds {KINETIC_BOUND}")
    n_steps = int(round(t_final / dt))
    save_every = save_every or n_steps
    single = np.ndim(field.psi1) == 1
    p1 = np.array(np.atleast_2d(field.psi1), dtype=complex, order="C")
    p0 = np.array(np.atleast_2d(field.psi0), dtype=complex, order="C")
    k = lattice.k_values
    ek = hbar * k * k / (2.0 * mass)
    half_kin = np.exp(-0.5j * ek * dt)
    full_kin = half_kin * half_kin
    u = interactions.u11
    dx = lattice.dx
    h = dt / hbar
    shift1 = mu
    shift0 = mu
    if wigner_shift:
        shift1 += (u + 0.5 * interactions.u10) / dx
        shift0 += (interactions.u00 + 0.5 * interactions.u10) / dx
    args = (u * h, interactions.u10 * h, interactions.u00 * h, shift1 * h, shift0 * h,
            math.cos(0.5 * omega * dt), math.sin(0.5 * omega * dt))

    def snapshot():
        if single:
            return WignerField(p1[0].copy(), p0[0].copy(), field.seed)
        return WignerField(p1.copy(), p0.copy(), field.seed)

    yield 0.0, snapshot()
    f1 = scipy.fft.fft(p1, axis=-1)
    f0 = scipy.fft.fft(p0, axis=-1)
    f1 *= half_kin
    f0 *= half_kin
    for i in range(1, n_steps + 1):
        p1 = scipy.fft.ifft(f1, axis=-1)
        p0 = scipy.fft.ifft(f0, axis=-1)
        _potential_step(p1, p0, *args)
        f1 = scipy.fft.fft(p1, axis=-1)
        f0 = scipy.fft.fft(p0, axis=-1)
        if i % save_every == 0 or i == n_steps:
            f1 *= half_kin
            f0 *= half_kin
            p1 = scipy.fft.ifft(f1, axis=-1)
            p0 = scipy.fft.ifft(f0, axis=-1)
            if not (np.all(np.isfinite(p1)) and np.all(np.isfinite(p0))):
                raise NonFiniteStateError(i * dt)
            yield i * dt, snapshot()
            f1 *= half_kin
            f0 *= half_kin
        else:
            f1 *= full_kin
            f0 *= full_kin


@dataclass(frozen=True)
class MomentumDensity:
    """Wigner-corrected occupation per lattice mode at one time, FFT k order.

    ``occupation[j]`` is ``<|psi_j(k)|^2> - 1/2`` for component j = (1, 0);
    ``density = occupation / L`` (atoms per unit k-bin per unit length), so
    ``density.sum() * L`` is the atom number on the lattice.
    """

    t: float
    k: np.ndarray
    occupation: np.ndarray  # (2, N)
    length: float
    realizations: int

    @property
    def density(self) -> np.ndarray:
        return self.occupation / self.length


def _mode_power(p1, p0, dx):
    n = p1.shape[-1]
    scale = dx / n
    f1 = scipy.fft.fft(p1, axis=-1)
    f0 = scipy.fft.fft(p0, axis=-1)
    return np.stack([(f1.real**2 + f1.imag**2) * scale, (f0.real**2 + f0.imag**2) * scale])


def momentum_density(ensemble, lattice: Lattice1D, t: float) -> MomentumDensity:
    """Ensemble average of |psi_j(k)|^2 with the half quantum per mode subtracted once."""
    fields = list(ensemble)
    if not fields:
        raise ValueError("empty ensemble")
    total = np.zeros((2, lattice.n_points))
    count = 0
    for f in fields:
        p = _mode_power(np.atleast_2d(f.psi1), np.atleast_2d(f.psi0), lattice.dx)
        total += p.sum(axis=1)
        count += p.shape[1]
    return MomentumDensity(t, lattice.k_values, total / count - NOISE_FLOOR, lattice.length, count)


# ---------------------------------------------------------------------------
# Ensemble driver
# ---------------------------------------------------------------------------


@dataclass
class TWAResult:
    lattice: Lattice1D
    times: np.ndarray
    occupation: np.ndarray  # (n_times, 2, N), Wigner-corrected
    realizations: int
    n1d: float
    dt: float
    max_norm_drift: float
    meta: dict = field(default_factory=dict)

    def snapshot(self, i: int) -> MomentumDensity:
        return MomentumDensity(float(self.times[i]), self.lattice.k_values, self.occupation[i],
                               self.lattice.length, self.realizations)

    @property
    def condensate_number(self) -> float:
        return self.n1d * self.lattice.length

    def pair_occupation(self, k: float) -> np.ndarray:
        """Total (both components) occupation averaged over the +k and -k bins."""
        i = self.lattice.index_of(abs(k))
        j = self.lattice.index_of(-abs(k))
        occ = self.occupation.sum(axis=1)
        return 0.5 * (occ[:, i] + occ[:, j])


def _run_chunk(indices, lattice, n1d, split, interactions, omega, mu, t_final, dt, mass, hbar,
               save_every, seed, wigner_shift):
    fields = [sample_initial_field(lattice, n1d, split, seed, int(i)) for i in indices]
    batch = WignerField(np.stack([f.psi1 for f in fields]), np.stack([f.psi0 for f in fields]), seed)
    n0 = batch.atom_number(lattice.dx)
    sums = []
    drift = 0.0
    for _, snap in evolve_twa(batch, lattice, interactions, omega, mu, t_final, dt, mass, hbar,
                              save_every, wigner_shift):
        sums.append(_mode_power(snap.psi1, snap.psi0, lattice.dx).sum(axis=1))
        drift = max(drift, float(np.max(np.abs(snap.atom_number(lattice.dx) / n0 - 1.0))))
    return np.array(sums), drift


def run_ensemble(lattice: Lattice1D, n1d: float, interactions: InteractionSet, omega: float, mu: float,
                 t_final: float, dt: float, mass: float, realizations: int, seed: int,
                 save_interval: float, population_split: float = 1.0, hbar: float = HBAR,
                 threads: int | None = None, chunk_size: int = CHUNK_SIZE,
                 wigner_shift: bool = True) -> TWAResult:
    """Evolve ``realizations`` trajectories and accumulate mode occupations.

    Trajectories are grouped in fixed chunks of ``chunk_size`` consecutive
    indices; chunk sums are added in index order, so the result is bitwise
    independent of ``threads``.
    """
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    save_every = max(1, int(round(save_interval / dt)))
    chunks = [range(i, min(i + chunk_size, realizations)) for i in range(0, realizations, chunk_size)]
    args = (lattice, n1d, population_split, interactions, omega, mu, t_final, dt, mass, hbar,
            save_every, seed, wigner_shift)
    threads = threads or os.cpu_count() or 1
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _run_chunk(c, *args), chunks))
    else:
        parts = [_run_chunk(c, *args) for c in chunks]
    total = parts[0][0].copy()
    for p, _ in parts[1:]:
        total += p
    n_steps = int(round(t_final / dt))
    steps = list(range(0, n_steps + 1, save_every))
    if steps[-1] != n_steps:
        steps.append(n_steps)
    return TWAResult(lattice, np.array(steps) * dt, total / realizations - NOISE_FLOOR, realizations,
                     n1d, dt, max(d for _, d in parts))


@dataclass(frozen=True)
class GrowthFit:
    gamma: float
    t_start: float
    t_end: float
    n_points: int


def growth_rate_fit(times, occupation, upper: float, lower: float = 10.0 * NOISE_FLOOR,
                    t_max: float | None = None, min_points: int = 3) -> GrowthFit:
    """Growth rate from the slope of log(occupation) inside ``lower < n < upper``.

    Occupation of an unstable pair grows as exp(2 gamma t), so the returned
    gamma is half the fitted slope. The window is the first contiguous run
    of samples inside the band, optionally cut at ``t_max``.

    Raises
    ------
    WindowError
        Fewer than ``min_points`` samples in the window.
    """
    times = np.asarray(times, dtype=float)
    occ = np.asarray(occupation, dtype=float)
    inside = (occ > lower) & (occ < upper)
    if t_max is not None:
        inside &= times <= t_max * (1 + 1e-12)
    idx = np.flatnonzero(inside)
    if len(idx) == 0:
        raise WindowError("window empty: occupation never inside (lower, upper)")
    start = idx[0]
    stop = start
    while stop + 1 < len(occ) and inside[stop + 1]:
        stop += 1
    if stop - start + 1 < min_points:
        raise WindowError(f"window empty: only {stop - start + 1} sample(s) inside (lower, upper)")
    sl = slice(start, stop + 1)
    slope, _ = np.polyfit(times[sl], np.log(occ[sl]), 1)
    return GrowthFit(0.5 * float(slope), float(times[start]), float(times[stop]), stop - start + 1)


def depletion(result: TWAResult) -> np.ndarray:
    """Fraction of atoms outside the k = 0 mode at every saved time."""
    occ = result.occupation.sum(axis=1)
    return (occ.sum(axis=1) - occ[:, 0]) / result.condensate_number


def linear_regime_end(result: TWAResult, fraction: float = 0.01) -> int:
    """Last save index before the depleted fraction first reaches ``fraction``."""
    bad = np.flatnonzero(depletion(result) >= fraction)
    return int(bad[0] - 1) if len(bad) else len(result.times) - 1


def homogeneous_cutoff(t: float, mass: float, hbar: float = HBAR) -> float:
    """k below which eps(k) t / hbar < 1.

    Such modes have not resolved their kinetic energy by time t and follow
    the neutral family of homogeneous orbits, whose amplitude-dependent
    period gives polynomial (secular) rather than exponential growth.
    """
    return math.sqrt(2.0 * mass / (hbar * t))


def positive_pair_occupation(result: TWAResult) -> tuple[np.ndarray, np.ndarray]:
    """(k > 0 bins, pair occupation of shape (n_times, n_bins)) averaged over +-k, summed over components."""
    n = result.lattice.n_points
    pos = np.arange(1, n // 2)
    occ = result.occupation.sum(axis=1)
    return result.lattice.k_values[pos], 0.5 * (occ[:, pos] + occ[:, n - pos])


def growth_contrast(pair: np.ndarray, end: int) -> np.ndarray:
    """max occupation over the second half of [0, end] divided by the max over the first half.

    Bounded oscillation of stable (squeezed) modes gives a contrast near one;
    exponential growth at rate gamma gives about exp(gamma t_end).
    """
    half = end // 2
    early = np.maximum(pair[: half + 1].max(axis=0), NOISE_FLOOR)
    return pair[half: end + 1].max(axis=0) / early


@dataclass
class TWAComparison:
    t_linear: float
    k_homogeneous: float
    contrast: float
    growing_k: np.ndarray
    unmatched_growing_k: np.ndarray
    missing_bands: list
    k_star: float
    gamma_floquet: float
    gamma_fit: float | None
    fit_error: str | None = None

    @property
    def relative_error(self) -> float:
        if self.gamma_fit is None:
            return math.inf
        return abs(self.gamma_fit - self.gamma_floquet) / self.gamma_floquet

    @property
    def locations_ok(self) -> bool:
        return len(self.unmatched_growing_k) == 0 and not self.missing_bands

    def rate_ok(self, tol: float = 0.25) -> bool:
        return self.relative_error <= tol

    def as_dict(self) -> dict:
        return {
            "t_linear": self.t_linear,
            "k_homogeneous": self.k_homogeneous,
            "contrast": self.contrast,
            "growing_k": [float(k) for k in self.growing_k],
            "unmatched_growing_k": [float(k) for k in self.unmatched_growing_k],
            "missing_bands": self.missing_bands,
            "k_star": self.k_star,
            "gamma_floquet": self.gamma_floquet,
            "gamma_fit": self.gamma_fit,
            "relative_error": None if self.gamma_fit is None else self.relative_error,
            "locations_ok": self.locations_ok,
            "fit_error": self.fit_error,
        }


def compare_with_floquet(result: TWAResult, k_grid, gamma_max, unstable, mass: float,
                         hbar: float = HBAR, contrast: float = 4.0, fraction: float = 0.01) -> TWAComparison:
    """Cross-check TWA growth against a Floquet scan.

    Parameters
    ----------
    k_grid, gamma_max, unstable : array_like
        Ascending scan grid, the largest exponent and the unstable flag per point.
    contrast : float
        A lattice bin counts as growing when :func:`growth_contrast` over the
        linear regime exceeds this value.

    Notes
    -----
    Growing bins above the homogeneous cutoff must lie within one bin
    (the coarser of lattice and scan spacing) of an unstable scan point.
    Conversely every unstable band whose peak rate would reach the contrast
    within the linear regime, ``gamma_max >= ln(contrast) / t_linear``, must
    contain a growing bin. The rate check fits the pair occupation at the
    lattice bin nearest the most unstable scan point over the linear regime.
    """
    k_grid = np.asarray(k_grid, dtype=float)
    gamma_max = np.asarray(gamma_max, dtype=float)
    unstable = np.asarray(unstable, dtype=bool)
    end = linear_regime_end(result, fraction)
    if end < 2:
        raise WindowError("linear regime shorter than three saved samples")
    t_lin = float(result.times[end])
    k_h = homogeneous_cutoff(t_lin, mass, hbar)
    kpos, pair = positive_pair_occupation(result)
    ratio = growth_contrast(pair, end)
    in_scan = (kpos >= max(k_h, k_grid[0])) & (kpos <= k_grid[-1])
    growing = kpos[(ratio > contrast) & in_scan]
    spacing = max(result.lattice.dk, float(np.max(np.diff(k_grid))) if len(k_grid) > 1 else 0.0)
    tol = spacing * (1 + 1e-9)
    k_unstable = k_grid[unstable]
    unmatched = np.array([k for k in growing
                          if len(k_unstable) == 0 or np.min(np.abs(k_unstable - k)) > tol])
    missing = []
    visible = math.log(contrast) / t_lin
    i = 0
    while i < len(k_grid):
        if not unstable[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(k_grid) and unstable[j + 1]:
            j += 1
        lo, hi = k_grid[i], k_grid[j]
        if lo >= k_h and gamma_max[i:j + 1].max() >= visible:
            if not np.any((growing >= lo - tol) & (growing <= hi + tol)):
                missing.append([float(lo), float(hi)])
        i = j + 1
    istar = int(np.argmax(np.where(k_grid >= k_h, gamma_max, -np.inf)))
    k_star = float(k_grid[istar])
    jbin = int(np.argmin(np.abs(kpos - k_star)))
    try:
        fit = growth_rate_fit(result.times, pair[:, jbin], fraction * result.condensate_number,
                              t_max=t_lin)
        gamma_fit, err = fit.gamma, None
    except WindowError as exc:
        gamma_fit, err = None, str(exc)
    return TWAComparison(t_lin, k_h, contrast, growing, unmatched, missing, k_star,
                         float(gamma_max[istar]), gamma_fit, err)


def write_momentum_csv(result: TWAResult, path, header_lines=()) -> None:
    """Long-format CSV: t, k (ascending), density of component 1 and 0 (m^-1 per mode)."""
    k = result.lattice.k_values
    order = np.argsort(k)
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "k", "density_1", "density_0"])
        L = result.lattice.length
        for i, t in enumerate(result.times):
            ft = format_float(t)
            d = result.occupation[i] / L
            for j in order:
                writer.writerow([ft, format_float(k[j]), format_float(d[0, j]), format_float(d[1, j])])
