"""Floquet stability of Bogoliubov fluctuations about a periodic mean field.

The fluctuation vector is ordered ``(dpsi1(k), dpsi1^dagger(-k), dpsi0(k),
dpsi0^dagger(-k))``; its generator ``H(k, t)`` is a traceless 4x4 complex
matrix built from the instantaneous mean field. The one-period propagator
(monodromy matrix) is obtained by integrating ``dPi/dt = -(i/hbar) H Pi``
with the same RK4 step as the mean field, reusing the stored mean-field
stage values so that no interpolation enters.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .integrate import NumericalError
from .meanfield import MeanFieldState, Trajectory, evolve_mean_field, format_float
from .params import HBAR, InteractionSet

DET_TOL = 1e-6
PERIODICITY_TOL = 1e-3
GAMMA_TOL_FRACTION = 1e-3
CHUNK_SIZE = 25

STABLE = "stable"
TWO_MODE = "two_mode_unstable"
FOUR_MODE = "four_mode_unstable"
DEGENERATE = "degenerate"

# sign pattern of the kinetic energy on the diagonal
_EPS_SIGNS = np.array([1.0, -1.0, 1.0, -1.0])


class MonodromyError(NumericalError):
    """Monodromy integration failed (coarse step, non-finite entries, bad background)."""

    def __init__(self, message: str, k=None):
        if k is not None:
            message = f"k = {k!r} m^-1: {message}"
        super().__init__(message)
        self.k = k


class SpectrumScanError(NumericalError):
    """Some k-points of a scan failed; ``partial`` holds the successful ones."""

    def __init__(self, failures, partial):
        ks = ", ".join(f"{k:.6e}" for k, _ in failures[:5])
        more = "" if len(failures) <= 5 else f" (+{len(failures) - 5} more)"
        super().__init__(f"{len(failures)} k-point(s) failed: {ks}{more}; first error: {failures[0][1]}")
        self.failures = failures
        self.partial = partial


def kinetic_energy(k, mass: float, hbar: float = HBAR):
    """eps(k) = hbar^2 k^2 / 2M (J); depends on k only through k^2."""
    k = np.asarray(k, dtype=float)
    return hbar**2 * (k * k) / (2.0 * mass)


# ---------------------------------------------------------------------------
# Generator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FluctuationGenerator:
    entries: np.ndarray  # (4, 4) complex, J
    k: float

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.entries))


def _background_generator(psi1, psi0, interactions: InteractionSet, mu: float, omega: float,
                          hbar: float = HBAR) -> np.ndarray:
    """k-independent part of H for mean-field values of any shape ``S``; returns ``S + (4, 4)``."""
    psi1 = np.asarray(psi1, dtype=complex)
    psi0 = np.asarray(psi0, dtype=complex)
    u = interactions.u11
    kappa = interactions.kappa
    d1 = np.abs(psi1) ** 2
    d0 = np.abs(psi0) ** 2
    q1 = u * (2.0 * d1 + d0)
    q0 = u * (2.0 * kappa * d0 + d1)
    u10 = u * np.conj(psi1) * psi0
    u01 = u * np.conj(psi0) * psi1
    v11 = u * psi1 * psi1
    v10 = u * psi1 * psi0
    v00 = u * psi0 * psi0
    hom = hbar * omega
    h = np.zeros(psi1.shape + (4, 4), dtype=complex)
    h[..., 0, 0] = q1 - mu
    h[..., 0, 1] = v11
    h[..., 0, 2] = u01 + hom
    h[..., 0, 3] = v10
    h[..., 1, 0] = -np.conj(v11)
    h[..., 1, 1] = -(q1 - mu)
    h[..., 1, 2] = -np.conj(v10)
    h[..., 1, 3] = -u10 - hom
    h[..., 2, 0] = u10 + hom
    h[..., 2, 1] = v10
    h[..., 2, 2] = q0 - mu
    h[..., 2, 3] = kappa * v00
    h[..., 3, 0] = -np.conj(v10)
    h[..., 3, 1] = -u01 - hom
    h[..., 3, 2] = -kappa * np.conj(v00)
    h[..., 3, 3] = -(q0 - mu)
    return h


def build_generator(k: float, state: MeanFieldState, interactions: InteractionSet, mu: float,
                    omega: float, mass: float, hbar: float = HBAR) -> FluctuationGenerator:
    """Fluctuation generator H(k) (J) at one instant of the mean field.

    The diagonal is ``+-(eps + q_i - mu)`` in cancelling pairs, so the trace
    vanishes identically; ``k`` enters only through ``eps(k)``.
    """
    h = _background_generator(state.psi1, state.psi0, interactions, mu, omega, hbar)
    h = h + np.diag(_EPS_SIGNS * float(kinetic_energy(k, mass, hbar))).astype(complex)
    return FluctuationGenerator(h, float(k))


# ---------------------------------------------------------------------------
# Periodic background and monodromy
# ---------------------------------------------------------------------------


def periodic_background(initial: MeanFieldState, interactions: InteractionSet, omega: float,
                        period: float, mu: float, steps_per_period: int = 2000,
                        hbar: float = HBAR) -> Trajectory:
    """One period of the mean field with ``steps_per_period`` RK4 steps and stored stages."""
    dt = period / steps_per_period
    traj = evolve_mean_field(initial, interactions, omega, mu, period, dt, hbar=hbar, store_stages=True)
    traj.meta["period"] = period
    return traj


def background_periodicity_residual(traj: Trajectory) -> float:
    """max_j |psi_j(T) - psi_j(0)| / max_t |psi_j| for a one-period background."""
    v = traj.values
    scale = np.max(np.abs(v), axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return float(np.max(np.abs(v[-1] - v[0]) / scale))


@dataclass(frozen=True)
class MonodromyResult:
    matrix: np.ndarray  # (4, 4) complex
    eigenvalues: np.ndarray  # (4,) complex
    k: float
    det_residual: float
    det_history_residual: float | None = None  # max_t |det Pi(t) - 1| when tracked


def _propagate(k: np.ndarray, background: Trajectory, interactions: InteractionSet, omega: float,
               mass: float, hbar: float, track_det: bool, record=None):
    """Joint RK4 for a batch of k; returns (Pi(T) of shape (K, 4, 4), det history residual).

    ``record`` maps step indices to lists that receive a copy of Pi after that
    many steps (index 0 is the identity).
    """
    if background.stages is None:
        raise ValueError("background trajectory must be generated with store_stages=True")
    stages = background.stages  # (n_steps, 4, 2)
    dt = background.dt
    # -(i/hbar) times the k-independent generator at every stage
    c0 = (-1j / hbar) * _background_generator(stages[..., 0], stages[..., 1], interactions,
                                              background.mu, omega, hbar)
    # kinetic part is diagonal: -(i/hbar) eps(k) * signs
    ck = ((-1j / hbar) * kinetic_energy(k, mass, hbar))[:, None] * _EPS_SIGNS[None, :]
    ck = ck[:, :, None]  # (K, 4, 1) scales rows of Pi

    def rhs(c, p):
        return np.matmul(c, p) + ck * p

    kk = len(k)
    p = np.broadcast_to(np.eye(4, dtype=complex), (kk, 4, 4)).copy()
    half = 0.5 * dt
    worst_det = 0.0
    if record is not None and 0 in record:
        record[0].append(p.copy())
    for i in range(stages.shape[0]):
        c = c0[i]
        l1 = rhs(c[0], p)
        l2 = rhs(c[1], p + half * l1)
        l3 = rhs(c[2], p + half * l2)
        l4 = rhs(c[3], p + dt * l3)
        p = p + (dt / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4)
        if track_det:
            worst_det = max(worst_det, float(np.max(np.abs(np.linalg.det(p) - 1.0))))
        if record is not None and i + 1 in record:
            record[i + 1].append(p.copy())
    return p, (worst_det if track_det else None)


def monodromy_batch(k, background: Trajectory, interactions: InteractionSet, omega: float,
                    mass: float, hbar: float = HBAR, check_periodicity: bool = True,
                    track_det: bool = False, det_tol: float = DET_TOL) -> list[MonodromyResult]:
    """Monodromy matrices for every k in ``k`` (one shared background integration).

    Raises
    ------
    MonodromyError
        Background not periodic to ``PERIODICITY_TOL``, non-finite entries, or
        ``|det M - 1| > det_tol`` (step too coarse); the first offending k is named.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if check_periodicity:
        res = background_periodicity_residual(background)
        if not res < PERIODICITY_TOL:
            raise MonodromyError(f"background periodicity residual {res:.3e} >= {PERIODICITY_TOL:g}")
    mats, hist = _propagate(k, background, interactions, omega, mass, hbar, track_det)
    out = []
    for j, kj in enumerate(k):
        m = mats[j]
        if not np.all(np.isfinite(m)):
            raise MonodromyError("non-finite monodromy entries", k=float(kj))
        det_res = float(abs(np.linalg.det(m) - 1.0))
        if det_res > det_tol:
            raise MonodromyError(f"|det M - 1| = {det_res:.3e} > {det_tol:g}; reduce the step size",
                                 k=float(kj))
        out.append(MonodromyResult(m, np.linalg.eigvals(m), float(kj), det_res, hist))
    return out


def monodromy(k: float, background: Trajectory, interactions: InteractionSet, omega: float,
              mass: float, hbar: float = HBAR, **kwargs) -> MonodromyResult:
    """Pi(T) for a single wave number; see :func:`monodromy_batch`."""
    return monodromy_batch([k], background, interactions, omega, mass, hbar, **kwargs)[0]


def linear_vacuum_occupation(k, times, background: Trajectory, interactions: InteractionSet,
                             omega: float, mass: float, hbar: float = HBAR) -> np.ndarray:
    """Linearized occupation of a vacuum-seeded +-k pair, shape ``(len(times), len(k))``.

    With symmetric (Wigner) vacuum covariance ``I / 2`` for the fluctuation
    vector, the covariance at time t is ``Pi(t) Pi(t)^dagger / 2``; the
    occupation summed over both components and averaged over +k and -k is
    ``||Pi(t)||_F^2 / 4 - 1``. ``Pi(t) = Pi(t - nT) M^n`` with ``t - nT``
    rounded to the background step grid. Captures exponential (Floquet) and
    secular (near-degenerate) growth alike.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    times = np.asarray(times, dtype=float)
    period = background.duration
    n_steps = background.stages.shape[0]
    n_per = np.floor(times / period + 1e-9).astype(int)
    offs = np.rint((times - n_per * period) / background.dt).astype(int)
    wrap = offs >= n_steps
    n_per[wrap] += 1
    offs[wrap] -= n_steps
    record = {int(i): [] for i in np.unique(offs)}
    mono, _ = _propagate(k, background, interactions, omega, mass, hbar, False, record)
    powers = {0: np.broadcast_to(np.eye(4, dtype=complex), mono.shape).copy()}
    for n in range(1, int(n_per.max()) + 1):
        powers[n] = np.matmul(mono, powers[n - 1])
    out = np.empty((len(times), len(k)))
    for j, (n, o) in enumerate(zip(n_per, offs)):
        pi_t = np.matmul(record[int(o)][0], powers[int(n)])
        out[j] = 0.25 * np.sum(np.abs(pi_t) ** 2, axis=(1, 2)) - 1.0
    return out


# ---------------------------------------------------------------------------
# Exponents
# ---------------------------------------------------------------------------


def fold_angular(omega, period: float):
    """Fold angular frequencies into [-pi/T, pi/T)."""
    w = 2.0 * math.pi / period
    return np.mod(np.asarray(omega, dtype=float) + 0.5 * w, w) - 0.5 * w


def classify(gamma, gamma_tol: float) -> str:
    """Class from the census of exponents with |gamma| >= gamma_tol."""
    n = int(np.count_nonzero(np.abs(np.asarray(gamma)) >= gamma_tol))
    return {0: STABLE, 2: TWO_MODE, 4: FOUR_MODE}.get(n, DEGENERATE)


@dataclass(frozen=True)
class FloquetExponentSet:
    """xi = omega + i gamma for the four eigenvalues, sorted by descending gamma.

    ``omega`` is angular (rad/s) in [-pi/T, pi/T); ``gamma`` in 1/s.
    """

    omega: np.ndarray
    gamma: np.ndarray
    classification: str
    period: float
    gamma_tol: float
    eigenvalues: np.ndarray = field(repr=False, default=None)

    @property
    def xi(self) -> np.ndarray:
        return self.omega + 1j * self.gamma

    @property
    def max_gamma(self) -> float:
        return float(np.max(self.gamma))

    def reconstruct(self) -> np.ndarray:
        """exp(-i xi T), which reproduces the monodromy eigenvalues."""
        return np.exp(-1j * self.xi * self.period)


def floquet_exponents(mono: MonodromyResult | np.ndarray, period: float,
                      gamma_tol: float | None = None) -> FloquetExponentSet:
    """Principal-branch exponents from lambda = exp(-i xi T).

    ``mono`` may also be a bare 4x4 matrix. ``gamma_tol`` defaults to
    ``1e-3 * 2 pi / T``.
    """
    if isinstance(mono, MonodromyResult):
        lam = np.asarray(mono.eigenvalues, dtype=complex)
    else:
        lam = np.linalg.eigvals(np.asarray(mono, dtype=complex))
    if gamma_tol is None:
        gamma_tol = GAMMA_TOL_FRACTION * 2.0 * math.pi / period
    gamma = np.log(np.abs(lam)) / period
    omega = fold_angular(-np.angle(lam) / period, period)
    order = np.lexsort((omega, -gamma))
    return FloquetExponentSet(omega[order], gamma[order], classify(gamma, gamma_tol), period,
                              gamma_tol, lam[order])


@dataclass(frozen=True)
class SymmetryReport:
    max_mismatch: float
    tol: float
    per_map: dict

    @property
    def passed(self) -> bool:
        return self.max_mismatch < self.tol


def _greedy_match(images: np.ndarray, targets: np.ndarray) -> float:
    """One-to-one nearest matching; returns the worst relative distance."""
    dist = np.abs(images[:, None] - targets[None, :]) / np.maximum(1.0, np.abs(targets))[None, :]
    free_i = set(range(len(images)))
    free_j = set(range(len(targets)))
    worst = 0.0
    for flat in np.argsort(dist, axis=None, kind="stable"):
        i, j = divmod(int(flat), len(targets))
        if i in free_i and j in free_j:
            worst = max(worst, float(dist[i, j]))
            free_i.discard(i)
            free_j.discard(j)
    return worst


def check_eigenvalue_symmetry(mono: MonodromyResult | np.ndarray, tol: float = 1e-6) -> SymmetryReport:
    """Closure of the eigenvalue set under conj, inverse and inverse-conj.

    Distances are relative, ``|a - b| / max(1, |b|)``.
    """
    lam = np.asarray(mono.eigenvalues if isinstance(mono, MonodromyResult) else mono, dtype=complex)
    maps = {"conj": np.conj(lam), "inv": 1.0 / lam, "inv_conj": 1.0 / np.conj(lam)}
    per_map = {name: _greedy_match(img, lam) for name, img in maps.items()}
    return SymmetryReport(max(per_map.values()), tol, per_map)


def exhaustive_symmetry_mismatch(lam) -> float:
    """Reference for :func:`check_eigenvalue_symmetry`: best permutation per map."""
    lam = np.asarray(lam, dtype=complex)
    worst = 0.0
    for img in (np.conj(lam), 1.0 / lam, 1.0 / np.conj(lam)):
        best = min(
            max(abs(img[i] - lam[p]) / max(1.0, abs(lam[p])) for i, p in enumerate(perm))
            for perm in itertools.permutations(range(len(lam)))
        )
        worst = max(worst, best)
    return worst


# ---------------------------------------------------------------------------
# Scan
# ---------------------------------------------------------------------------


@dataclass
class FloquetSpectrum:
    k_grid: np.ndarray
    exponents: list
    period: float
    det_residuals: np.ndarray
    gamma_tol: float
    metadata: dict = field(default_factory=dict)
    monodromies: list = field(default_factory=list, repr=False)

    @property
    def omega(self) -> np.ndarray:
        return np.array([e.omega for e in self.exponents]).reshape(-1, 4)

    @property
    def gamma(self) -> np.ndarray:
        return np.array([e.gamma for e in self.exponents]).reshape(-1, 4)

    @property
    def classes(self) -> list[str]:
        return [e.classification for e in self.exponents]


def _scan_chunk(k, background, interactions, omega, mass, hbar, gamma_tol, det_tol):
    try:
        monos = monodromy_batch(k, background, interactions, omega, mass, hbar,
                                check_periodicity=False, det_tol=np.inf)
    except MonodromyError as exc:  # pragma: no cover - batch-level failure
        return [(float(kj), None, str(exc)) for kj in k]
    out = []
    for m in monos:
        if not np.all(np.isfinite(m.matrix)):
            out.append((m.k, None, "non-finite monodromy entries"))
        elif m.det_residual > det_tol:
            out.append((m.k, None, f"|det M - 1| = {m.det_residual:.3e} > {det_tol:g}"))
        else:
            out.append((m.k, (m, floquet_exponents(m, background.duration, gamma_tol)), None))
    return out


def scan_spectrum(k_grid, background: Trajectory, interactions: InteractionSet, omega: float,
                  mass: float, hbar: float = HBAR, threads: int | None = None,
                  chunk_size: int = CHUNK_SIZE, gamma_tol_fraction: float = GAMMA_TOL_FRACTION,
                  det_tol: float = DET_TOL, metadata: dict | None = None) -> FloquetSpectrum:
    """Floquet exponents on an ascending k grid sharing one periodic background.

    The grid is cut into fixed chunks of ``chunk_size`` points that are
    propagated independently (in a thread pool when ``threads > 1``) and
    merged by grid index, so the result does not depend on ``threads``.

    Raises
    ------
    MonodromyError
        The background is not periodic.
    SpectrumScanError
        One or more k failed; ``exc.partial`` holds the spectrum of the rest.
    """
    k_grid = np.asarray(k_grid, dtype=float)
    if k_grid.ndim != 1 or len(k_grid) == 0:
        raise ValueError("k_grid must be a non-empty 1D array")
    if np.any(np.diff(k_grid) <= 0):
        raise ValueError("k_grid must be strictly ascending")
    res = background_periodicity_residual(background)
    if not res < PERIODICITY_TOL:
        raise MonodromyError(f"background periodicity residual {res:.3e} >= {PERIODICITY_TOL:g}")
    period = background.duration
    gamma_tol = gamma_tol_fraction * 2.0 * math.pi / period
    chunks = [k_grid[i:i + chunk_size] for i in range(0, len(k_grid), chunk_size)]
    threads = threads or os.cpu_count() or 1
    args = (background, interactions, omega, mass, hbar, gamma_tol, det_tol)
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda c: _scan_chunk(c, *args), chunks))
    else:
        results = [_scan_chunk(c, *args) for c in chunks]
    flat = [r for chunk in results for r in chunk]
    ok = [(k, payload) for k, payload, err in flat if payload is not None]
    failures = [(k, err) for k, payload, err in flat if payload is None]
    meta = dict(metadata or {})
    meta["background_periodicity_residual"] = res
    spectrum = FloquetSpectrum(
        k_grid=np.array([k for k, _ in ok]),
        exponents=[p[1] for _, p in ok],
        period=period,
        det_residuals=np.array([p[0].det_residual for _, p in ok]),
        gamma_tol=gamma_tol,
        metadata=meta,
        monodromies=[p[0] for _, p in ok],
    )
    if failures:
        raise SpectrumScanError(failures, spectrum)
    return spectrum


@dataclass(frozen=True)
class Band:
    k_start: float
    k_end: float
    classification: str
    k_at_max_gamma: float
    gamma_max: float

    def as_dict(self) -> dict:
        return {"k_start": self.k_start, "k_end": self.k_end, "class": self.classification,
                "k_at_max_gamma": self.k_at_max_gamma, "gamma_max": self.gamma_max}


def band_edges(spectrum: FloquetSpectrum) -> list[Band]:
    """Maximal runs of consecutive grid points sharing one non-stable class."""
    bands = []
    classes = spectrum.classes
    gmax = spectrum.gamma.max(axis=1) if len(classes) else np.array([])
    i = 0
    while i < len(classes):
        cls = classes[i]
        j = i
        while j + 1 < len(classes) and classes[j + 1] == cls:
            j += 1
        if cls != STABLE:
            sl = slice(i, j + 1)
            m = i + int(np.argmax(gmax[sl]))
            bands.append(Band(float(spectrum.k_grid[i]), float(spectrum.k_grid[j]), cls,
                              float(spectrum.k_grid[m]), float(gmax[m])))
        i = j + 1
    return bands


# ---------------------------------------------------------------------------
# Analytic oracles and gain
# ---------------------------------------------------------------------------


def bogoliubov_spectrum(k, n: float, u: float, mass: float, hbar: float = HBAR):
    """Homogeneous Bogoliubov frequency sqrt(eps (eps + 2 n U)) / hbar (rad/s)."""
    eps = kinetic_energy(k, mass, hbar)
    return np.sqrt(eps * (eps + 2.0 * n * u)) / hbar


def kappa1_spectrum(k, n: float, u: float, mass: float, hbar: float = HBAR):
    """(omega_up, omega_down) for kappa = 1: Bogoliubov and free-particle branches."""
    eps = kinetic_energy(k, mass, hbar)
    return np.sqrt(eps * (eps + 2.0 * n * u)) / hbar, eps / hbar


def predicted_gain(gamma, period: float, n_periods):
    """(cosh(n gamma T), sinh^2(n gamma T)) for a vacuum-seeded unstable pair."""
    n_periods = np.asarray(n_periods)
    if np.any(n_periods < 0):
        raise ValueError("n_periods must be >= 0")
    x = n_periods * np.asarray(gamma, dtype=float) * period
    return np.cosh(x), np.sinh(x) ** 2


_ETA = np.diag([1.0, -1.0, 1.0, -1.0]).astype(complex)


@dataclass(frozen=True)
class GainSample:
    n_periods: int
    occupation: float  # Monte-Carlo <|Lambda|^2> - 1/2
    stderr: float
    predicted: float  # sinh^2(n gamma T)


def unstable_pair_modes(mono: MonodromyResult | np.ndarray):
    """Left eigenvectors (c, c') of the most unstable lambda and of its partner 1/lambda*.

    ``c'`` is scaled so that ``c^dagger eta c' = 1`` with eta = diag(1, -1, 1, -1),
    the commutator metric of the fluctuation vector; ``Q = c^dagger Y`` and
    ``Q' = c'^dagger Y`` then satisfy ``[Q, Q'^dagger] = 1``. Returns
    ``(c, c', lambda, all left eigenvectors as rows of C)``.
    """
    m = np.asarray(mono.matrix if isinstance(mono, MonodromyResult) else mono, dtype=complex)
    lam, vr = np.linalg.eig(m)
    # rows of inv(vr) are left eigenvectors: inv(vr) @ m = diag(lam) @ inv(vr)
    left = np.linalg.inv(vr)
    i = int(np.argmax(np.abs(lam)))
    if not abs(lam[i]) > 1.0:
        raise ValueError("monodromy has no eigenvalue off the unit circle")
    partner = 1.0 / np.conj(lam[i])
    cand = [j for j in range(4) if j != i]
    j = min(cand, key=lambda q: abs(lam[q] - partner))
    c = np.conj(left[i])  # so that c^dagger = left[i]
    cp = np.conj(left[j])
    s = np.conj(c) @ _ETA @ cp
    cp = cp / np.conj(s)
    return c, cp, lam[i], left, (i, j)


def vacuum_seeded_gain(mono: MonodromyResult | np.ndarray, period: float, n_periods, samples: int = 20000,
                       seed: int = 0) -> list[GainSample]:
    """Monte-Carlo occupation of a vacuum-seeded unstable mode after n periods.

    The pair ``Lambda = (Q + Q') / sqrt(2)`` and ``Lambda'`` (with
    ``Q = (Lambda + Lambda'^*) / sqrt(2)``, ``Q' = (Lambda - Lambda'^*) / sqrt(2)``)
    starts as Wigner vacuum, ``<|Lambda|^2> = <|Lambda'|^2> = 1/2``; the
    fluctuation vector is reconstructed from (Q, Q') and propagated with
    ``M^n``. Theory predicts ``<|Lambda|^2> - 1/2 = sinh^2(n gamma T)``.
    """
    m = np.asarray(mono.matrix if isinstance(mono, MonodromyResult) else mono, dtype=complex)
    c, cp, lam, left, (i, j) = unstable_pair_modes(m)
    gamma = math.log(abs(lam)) / period
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((2, samples)) + 1j * rng.standard_normal((2, samples))) * 0.5
    q = (z[0] + np.conj(z[1])) / math.sqrt(2.0)
    qp = (z[0] - np.conj(z[1])) / math.sqrt(2.0)
    rows = np.stack([np.conj(c), np.conj(cp)] + [left[r] for r in range(4) if r not in (i, j)])
    rhs = np.zeros((4, samples), dtype=complex)
    rhs[0], rhs[1] = q, qp
    y = np.linalg.solve(rows, rhs)
    out = []
    ns = sorted(int(n) for n in np.atleast_1d(n_periods))
    if ns and ns[0] < 0:
        raise ValueError("n_periods must be >= 0")
    power = np.eye(4, dtype=complex)
    done = 0
    for n in ns:
        while done < n:
            power = m @ power
            done += 1
        yn = power @ y
        lam_n = (np.conj(c) @ yn + np.conj(cp) @ yn) / math.sqrt(2.0)
        occ = np.abs(lam_n) ** 2
        out.append(GainSample(n, float(occ.mean() - 0.5), float(occ.std(ddof=1) / math.sqrt(samples)),
                              float(predicted_gain(gamma, period, n)[1])))
    return out


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def write_spectrum_csv(spectrum: FloquetSpectrum, path, header_lines=()) -> None:
    """k, omega_1..4 (rad/s, folded to [-pi/T, pi/T)), gamma_1..4 (1/s), class."""
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(f"# period_s={format_float(spectrum.period)} nu0_hz={format_float(1 / spectrum.period)}\n")
        fh.write("# omega columns are angular (rad/s); divide by 2 pi for Hz\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k"] + [f"omega_{i}" for i in range(1, 5)] + [f"gamma_{i}" for i in range(1, 5)]
                        + ["class"])
        for k, e in zip(spectrum.k_grid, spectrum.exponents):
            writer.writerow([format_float(k)] + [format_float(x) for x in e.omega]
                            + [format_float(x) for x in e.gamma] + [e.classification])


def bands_summary(spectrum: FloquetSpectrum) -> dict:
    bands = band_edges(spectrum)
    return {
        "period_s": spectrum.period,
        "nu0_hz": 1.0 / spectrum.period,
        "gamma_tol": spectrum.gamma_tol,
        "k_min": float(spectrum.k_grid[0]),
        "k_max": float(spectrum.k_grid[-1]),
        "k_count": int(len(spectrum.k_grid)),
        "max_det_residual": float(np.max(spectrum.det_residuals)),
        "instabilities": bool(bands),
        "bands": [b.as_dict() for b in bands],
    }


def write_bands_json(spectrum: FloquetSpectrum, path, header: dict | None = None) -> dict:
    summary = dict(header or {})
    summary.update(bands_summary(spectrum))
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=False)
        fh.write("\n")
    return summary


def read_spectrum_csv(path) -> dict:
    """Inverse of :func:`write_spectrum_csv`: header ``key=value`` pairs, k, omega, gamma, classes."""
    header = {}
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                for token in line[1:].split():
                    if "=" in token:
                        key, value = token.split("=", 1)
                        header[key] = value
                continue
            rows.append(line)
    reader = csv.reader(rows)
    next(reader)  # column names
    data = [r for r in reader if r]
    k = np.array([float(r[0]) for r in data])
    return {
        "header": header,
        "k": k,
        "omega": np.array([[float(x) for x in r[1:5]] for r in data]).reshape(-1, 4),
        "gamma": np.array([[float(x) for x in r[5:9]] for r in data]).reshape(-1, 4),
        "classes": [r[9] for r in data],
    }
