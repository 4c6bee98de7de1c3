"""Config-driven glue: mean-field record, period, periodic background, spectrum."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import twa
from .floquet import FloquetSpectrum, periodic_background, scan_spectrum
from .meanfield import MeanFieldState, Trajectory, evolve_mean_field
from .params import (
    BackgroundDensity,
    InteractionSet,
    RunConfig,
    derive_interactions,
    estimate_peak_density,
)
from .period import PeriodEstimate, PeriodicityReport, detect_period, verify_periodicity


@dataclass
class Setup:
    config: RunConfig
    interactions: InteractionSet
    background: BackgroundDensity
    initial: MeanFieldState
    reference_mu: float  # offset the long record is generated with


def prepare(config: RunConfig) -> Setup:
    phys, num = config.physical, config.numerics
    inter = derive_interactions(phys)
    bg = estimate_peak_density(phys, inter, num.density)
    p = num.initial_population
    initial = MeanFieldState(complex(math.sqrt(bg.n * p)), complex(math.sqrt(bg.n * (1.0 - p))))
    ref = bg.n * inter.u11 if num.reference_offset == "chemical" else 0.0
    return Setup(config, inter, bg, initial, ref)


def run_meanfield(setup: Setup, t_final: float | None = None, dt: float | None = None) -> Trajectory:
    num = setup.config.numerics
    return evolve_mean_field(setup.initial, setup.interactions, setup.config.physical.rabi_frequency,
                             setup.reference_mu, t_final or num.t_final, dt or num.dt,
                             hbar=setup.config.physical.hbar)


@dataclass
class PeriodResult:
    trajectory: Trajectory
    estimate: PeriodEstimate
    periodicity: PeriodicityReport


def run_period(setup: Setup, t_final: float | None = None, dt: float | None = None) -> PeriodResult:
    traj = run_meanfield(setup, t_final, dt)
    hbar = setup.config.physical.hbar
    est = detect_period(traj, hbar=hbar)
    return PeriodResult(traj, est, verify_periodicity(traj, est, hbar=hbar))


def run_background(setup: Setup, estimate: PeriodEstimate) -> Trajectory:
    phys = setup.config.physical
    return periodic_background(setup.initial, setup.interactions, phys.rabi_frequency, estimate.T,
                               estimate.total_mu, setup.config.numerics.steps_per_period, hbar=phys.hbar)


def k_grid(config: RunConfig, k_min=None, k_max=None, k_count=None) -> np.ndarray:
    num = config.numerics
    return np.linspace(num.k_min if k_min is None else k_min,
                       num.k_max if k_max is None else k_max,
                       num.k_count if k_count is None else k_count)


def run_spectrum(setup: Setup, estimate: PeriodEstimate, k=None, threads: int | None = None) -> FloquetSpectrum:
    phys = setup.config.physical
    bg = run_background(setup, estimate)
    k = k_grid(setup.config) if k is None else np.asarray(k, dtype=float)
    meta = {"T": estimate.T, "nu0": estimate.nu0, "delta_nu": estimate.delta_nu,
            "total_mu": estimate.total_mu, "n": setup.background.n, "g": setup.background.g}
    return scan_spectrum(k, bg, setup.interactions, phys.rabi_frequency, phys.atom_mass, phys.hbar,
                         threads=threads, gamma_tol_fraction=setup.config.numerics.gamma_tol_fraction,
                         metadata=meta)


@dataclass
class TWASetup:
    lattice: "twa.Lattice1D"
    n1d: float
    interactions: InteractionSet
    area: float
    dt: float


def prepare_twa(setup: Setup, dt: float | None = None) -> TWASetup:
    phys, num = setup.config.physical, setup.config.numerics
    n1d, inter1d, area = twa.one_d_reduction(phys, setup.interactions, setup.background, num.twa_area)
    lattice = twa.Lattice1D(num.twa_points, num.twa_length)
    dt = dt or num.twa_dt or twa.choose_dt(lattice, inter1d, n1d, phys.rabi_frequency, phys.atom_mass,
                                           num.twa_save_interval, phys.hbar)
    return TWASetup(lattice, n1d, inter1d, area, dt)


def run_twa(setup: Setup, mu: float, seed: int, realizations: int | None = None,
            t_final: float | None = None, dt: float | None = None, threads: int | None = None,
            tw: TWASetup | None = None) -> twa.TWAResult:
    """Ensemble run for the configured lattice; ``mu`` is the phase-cancelling offset."""
    phys, num = setup.config.physical, setup.config.numerics
    tw = tw or prepare_twa(setup, dt)
    res = twa.run_ensemble(tw.lattice, tw.n1d, tw.interactions, phys.rabi_frequency, mu,
                           t_final or num.twa_t_final, tw.dt, phys.atom_mass,
                           realizations or num.twa_realizations, seed, num.twa_save_interval,
                           population_split=num.initial_population, hbar=phys.hbar, threads=threads)
    res.meta.update({"area": tw.area, "seed": seed})
    return res


def lattice_k_grid(tw: TWASetup, k_max: float) -> np.ndarray:
    """Positive lattice wave numbers up to ``k_max``."""
    k = tw.lattice.dk * np.arange(1, tw.lattice.n_points // 2)
    return k[k <= k_max * (1 + 1e-12)]
