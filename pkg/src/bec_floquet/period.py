"""Period and global-phase offset of a periodic (up to phase) time series.

The signals are written as a frequency comb ``sum_n a_n exp(i 2 pi (n nu0 + dnu) t)``.
Peaks of the discrete power spectrum give a first estimate of the comb,
which is then refined by a least-squares fit of the comb model to the raw
time series.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import least_squares

from .integrate import NumericalError
from .meanfield import Trajectory, format_float
from .params import HBAR

PEAK_THRESHOLD = 1e-6
MIN_PERIODS = 20


class PeriodDetectionError(NumericalError):
    pass


@dataclass(frozen=True)
class PeriodEstimate:
    T: float
    nu0: float
    delta_nu: float
    mu: float
    peak_table: list = field(default_factory=list, repr=False)
    mu_applied: float = 0.0
    comb_residual: float = 0.0  # Hz, max distance of a spectral peak from the fitted comb
    fit_residual: float = 0.0  # relative rms residual of the time-domain comb fit
    n_periods: float = 0.0

    @property
    def total_mu(self) -> float:
        """Offset that makes the fields periodic: the generating offset plus ``mu``."""
        return self.mu_applied + self.mu


def fold_offset(c: float, nu0: float) -> float:
    """Fold into [-nu0/2, nu0/2); the boundary +nu0/2 maps to -nu0/2."""
    return (c + 0.5 * nu0) % nu0 - 0.5 * nu0


def _signals(traj: Trajectory) -> np.ndarray:
    return np.asarray(traj.values, dtype=complex).reshape(len(traj.times), -1)


def _spectrum(x: np.ndarray, dt: float, window: str):
    n = x.shape[0]
    if window == "hann":
        x = x * np.hanning(n)[:, None]
    elif window != "rect":
        raise ValueError(f"unknown window {window!r}")
    power = np.abs(np.fft.fft(x, axis=0)) ** 2 / n**2
    freqs = np.fft.fftfreq(n, dt)
    order = np.argsort(freqs)
    return freqs[order], power[order]


def _find_peaks(freqs, power, pmax, threshold, window="rect"):
    """Local maxima above ``threshold * pmax`` with sub-bin interpolation.

    For the rectangular window the offset comes from the magnitude ratio to
    the larger neighbour, ``delta = a / (1 + a)``, which is exact for an
    isolated tone; log-quadratic interpolation of a sinc^2 peak is biased
    when the tone sits near a bin centre and both neighbours are near zeros
    of the kernel. The Hann window uses log-quadratic interpolation.
    """
    df = freqs[1] - freqs[0]
    padded = np.concatenate([[0.0], power, [0.0]])
    left, mid, right = padded[:-2], padded[1:-1], padded[2:]
    idx = np.nonzero((mid > threshold * pmax) & (mid > left) & (mid >= right))[0]
    peaks = []
    for i in idx:
        f, p = freqs[i], mid[i]
        if window == "rect":
            side = 1.0 if right[i] > left[i] else -1.0
            ratio = math.sqrt(max(right[i], left[i]) / p)
            delta = side * ratio / (1.0 + ratio)
            f = freqs[i] + delta * df
            if delta != 0.0:
                p = p * (math.pi * delta / math.sin(math.pi * delta)) ** 2
        elif left[i] > 0 and right[i] > 0:
            la, lb, lc = math.log(left[i]), math.log(p), math.log(right[i])
            denom = la - 2 * lb + lc
            if denom < 0:
                delta = 0.5 * (la - lc) / denom
                f = freqs[i] + delta * df
                p = math.exp(lb - 0.25 * (la - lc) * delta)
        peaks.append((float(f), float(p)))
    return peaks


def _merge(peaks, tol):
    peaks = sorted(peaks, key=lambda fp: -fp[1])
    kept = []
    for f, p in peaks:
        if all(abs(f - g) > tol for g, _ in kept):
            kept.append((f, p))
    return kept


def _comb_fit(freqs, nu0, ref, weights, pinned=False):
    """Weighted fit of ``n nu + c`` to the peaks; returns per-peak deviations."""
    n = np.round((freqs - ref) / nu0)
    if pinned:
        nu, c = _pinned_fit(freqs, nu0, weights)
    else:
        A = np.stack([n, np.ones_like(n)], axis=1) * weights[:, None]
        (nu, c), *_ = np.linalg.lstsq(A, freqs * weights, rcond=None)
    return nu, c, n.astype(int), np.abs(freqs - (n * nu + c))


def _pinned_fit(freqs, nu0, weights=None):
    n = np.round(freqs / nu0)
    w = np.ones_like(freqs) if weights is None else weights**2
    mask = n != 0
    if not np.any(mask):
        return nu0, 0.0
    return float(np.sum(w[mask] * n[mask] * freqs[mask]) / np.sum(w[mask] * n[mask] ** 2)), 0.0


def _fit_comb_timeseries(t, x, harmonics, nu0, c, df, fix_offset=False):
    """Variable-projection least squares of the comb model to ``x``.

    The model is exact in the time domain, so the record may be decimated as
    long as the sampling rate stays well above the highest fitted harmonic;
    the frequency resolution is set by the record length, which is kept.
    """
    dt = t[1] - t[0]
    fmax = float(np.max(np.abs(harmonics * nu0 + c)))
    stride = max(1, int(1.0 / (4.0 * fmax * dt))) if fmax > 0 else 1
    t, x = t[::stride], x[::stride]
    scale_nu = df

    def model_matrix(p):
        nu = nu0 + p[0] * scale_nu
        cc = c if fix_offset else c + p[1] * scale_nu
        return np.exp(2j * np.pi * np.outer(t, harmonics * nu + cc))

    def resid(p):
        A = model_matrix(p)
        coef, *_ = np.linalg.lstsq(A, x, rcond=None)
        r = (x - A @ coef).ravel()
        return np.concatenate([r.real, r.imag])

    p0 = np.zeros(1 if fix_offset else 2)
    sol = least_squares(resid, p0, method="lm", x_scale=1.0, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    rel = math.sqrt(np.sum(sol.fun**2) / max(np.sum(np.abs(x) ** 2), 1e-300))
    c_fit = c if fix_offset else c + sol.x[1] * scale_nu
    return nu0 + sol.x[0] * scale_nu, c_fit, rel


def detect_period(
    traj: Trajectory,
    threshold: float = PEAK_THRESHOLD,
    window: str = "rect",
    refine: bool = True,
    comb_tol_bins: float = 0.3,
    min_periods: float = MIN_PERIODS,
    max_harmonic: int = 12,
    core_fraction: float = 1e-4,
    strong_fraction: float = 1e-2,
    hbar: float = HBAR,
) -> PeriodEstimate:
    """Extract (T, nu0, dnu, mu) from a uniformly sampled trajectory.

    Parameters
    ----------
    traj : Trajectory
        Mean-field (psi1, psi0) or Bloch (w, rho10) samples; every column is
        treated as one complex signal. Bloch variables carry no global
        phase, so for ``kind == "bloch"`` the comb is pinned to contain zero
        frequency (offset 0); otherwise a record with only the two peaks at
        +-nu could be read as a half-spacing comb with offset nu.
    threshold : float
        Peaks below ``threshold`` times the largest power are ignored.
    window : {"rect", "hann"}
        Window for the peak search. The comb fit uses positions only, so the
        rectangular default is adequate for clean mean-field input.
    refine : bool
        Follow the spectral comb fit with a least-squares fit of the comb
        model to the time series itself (sub-bin accuracy on nu0 and dnu).
    core_fraction : float
        Peaks above this fraction of the largest power fix the comb; weaker
        peaks are kept only if they sit on it (rectangular-window leakage
        produces off-comb local maxima at the 1e-5 level).
    strong_fraction : float
        Core peaks above this fraction must lie within ``comb_tol_bins`` of
        the comb. Weaker core peaks get one full bin, because leakage from a
        strong neighbour biases their interpolated position; they also enter
        the comb fit with a tenth of the weight.

    Raises
    ------
    PeriodDetectionError
        Fewer than two significant peaks, no comb consistent with the peaks,
        or a record shorter than ``min_periods`` periods.
    """
    x = _signals(traj)
    dt = traj.dt
    freqs, power = _spectrum(x, dt, window)
    df = freqs[1] - freqs[0]
    pmax = power.max()
    if not pmax > 0:
        raise PeriodDetectionError("cannot determine nu0: signal is identically zero")

    table = []
    allpeaks = []
    for j in range(power.shape[1]):
        pk = _find_peaks(freqs, power[:, j], pmax, threshold, window)
        table.append(pk)
        allpeaks.extend(pk)
    peaks = _merge(allpeaks, 1.5 * df)
    if len(peaks) < 2:
        raise PeriodDetectionError(
            f"cannot determine nu0: only {len(peaks)} significant spectral peak(s)"
        )

    # the comb is fixed by the dominant peaks; weak peaks may be window leakage
    core = [fp for fp in peaks if fp[1] >= core_fraction * pmax]
    if len(core) < 2:
        core = peaks[:2]
    pf = np.array([f for f, _ in core])
    strong = np.array([p >= strong_fraction * pmax for _, p in core])
    ref = pf[0]  # strongest
    pinned = traj.kind == "bloch"
    if pinned:
        if np.min(np.abs(pf)) > comb_tol_bins * df:
            pf, strong = np.append(pf, 0.0), np.append(strong, True)
        ref = 0.0
    tol = np.where(strong, comb_tol_bins, 1.0) * df
    weights = np.where(strong, 1.0, 0.1)
    candidates = set()
    for f in pf:
        d = abs(f - ref)
        if d == 0.0:
            continue
        for m in range(1, max_harmonic + 1):
            if d / m > 3 * df:
                candidates.add(d / m)
    best = None
    for cand in sorted(candidates, reverse=True):
        nu, c, harm, dev = _comb_fit(pf, cand, ref, weights, pinned)
        if np.all(dev <= tol) and nu > 0:
            best = (nu, c, harm, float(np.max(dev)))
            break
    if best is None:
        raise PeriodDetectionError(
            "comb fit failed: spectral peaks are not commensurate (non-periodic or under-resolved input)"
        )
    nu0, c, _, comb_res = best
    allf = np.array([f for f, _ in peaks])
    harm_all = np.round((allf - c) / nu0)
    on_comb = np.abs(allf - (harm_all * nu0 + c)) <= np.where(
        np.array([p for _, p in peaks]) >= strong_fraction * pmax, comb_tol_bins, 1.0) * df
    harm = harm_all[on_comb].astype(int)
    n_periods = traj.duration * nu0
    if n_periods < min_periods:
        raise PeriodDetectionError(
            f"record spans only {n_periods:.1f} periods; need >= {min_periods}"
        )

    fit_rel = float("nan")
    if refine:
        t = traj.times - traj.times[0]
        harmonics = np.unique(harm).astype(float)
        nu0, c, fit_rel = _fit_comb_timeseries(t, x, harmonics, nu0, c, df, fix_offset=pinned)
        # time origin shift changes only the amplitudes, not the frequencies
    delta_nu = fold_offset(c, nu0)
    return PeriodEstimate(
        T=1.0 / nu0,
        nu0=nu0,
        delta_nu=delta_nu,
        mu=-2.0 * math.pi * hbar * delta_nu,
        peak_table=[[(float(f), float(p)) for f, p in comp] for comp in table],
        mu_applied=traj.mu,
        comb_residual=float(comb_res),
        fit_residual=float(fit_rel),
        n_periods=float(n_periods),
    )


@dataclass(frozen=True)
class PeriodicityReport:
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual < self.tol


def verify_periodicity(traj: Trajectory, estimate: PeriodEstimate, tol: float = 1e-3,
                       hbar: float = HBAR) -> PeriodicityReport:
    """max_t |psi_j(t + T) - psi_j(t)| / max|psi_j| after cancelling the phase offset.

    A trajectory generated with an offset other than ``estimate.total_mu`` is
    phase-corrected analytically; samples at t + T are obtained by cubic
    spline interpolation.
    """
    x = _signals(traj)
    t = traj.times
    if traj.kind == "meanfield":
        dmu = estimate.total_mu - traj.mu
        if dmu != 0.0:
            x = x * np.exp(1j * dmu * (t - t[0]) / hbar)[:, None]
    T = estimate.T
    mask = t + T <= t[-1]
    if not np.any(mask):
        raise ValueError("trajectory shorter than one period")
    spline_re = CubicSpline(t, x.real, axis=0)
    spline_im = CubicSpline(t, x.imag, axis=0)
    shifted = spline_re(t[mask] + T) + 1j * spline_im(t[mask] + T)
    worst = 0.0
    for j in range(x.shape[1]):
        scale = np.max(np.abs(x[:, j]))
        if scale == 0:
            continue
        worst = max(worst, float(np.max(np.abs(shifted[:, j] - x[mask, j])) / scale))
    return PeriodicityReport(worst, tol)


def write_power_spectrum_csv(traj: Trajectory, path, header_lines=(), window: str = "rect") -> None:
    """Power spectrum CSV: frequency (Hz) and power of each component, ascending frequency."""
    x = _signals(traj)
    freqs, power = _spectrum(x, traj.dt, window)
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frequency_hz"] + [f"power_{j + 1}" for j in range(power.shape[1])])
        for i, f in enumerate(freqs):
            writer.writerow([format_float(f)] + [format_float(p) for p in power[i]])
