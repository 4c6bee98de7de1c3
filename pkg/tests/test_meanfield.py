import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bec_floquet.integrate import NonFiniteStateError, StepSizeError, rk4
from bec_floquet.meanfield import (
    RESOLUTION_GUARD,
    BlochVector,
    FixedPoint,
    MeanFieldState,
    bloch_from_meanfield,
    energy_per_particle,
    bloch_rhs,
    evolve_bloch,
    evolve_mean_field,
    find_fixed_points,
    fixed_point_residual,
    kappa1_solution,
    verify_no_attracting_fixed_points,
    write_trajectory_csv,
)
from bec_floquet.params import HBAR, InteractionSet, PhysicalConfig, derive_interactions

from . import oracles
from .conftest import GOLDEN_ROOTS_G8

OMEGA = 2 * math.pi * 3000.0
HE = derive_interactions(PhysicalConfig())
N = 7.682206079355e19


def kappa1_interactions():
    return InteractionSet(HE.u11, HE.u11, HE.u11, 1.0)


def guard_dt(*rates):
    return RESOLUTION_GUARD / max(abs(r) for r in rates)


# -- mean-field evolution -----------------------------------------------------


def test_single_mode_phase_rotation():
    psi = math.sqrt(N)
    mu = 0.3 * N * HE.u11
    dt = 5e-8
    traj = evolve_mean_field(MeanFieldState(psi, 0j), HE, 0.0, mu, 1e-3, dt)
    rate = (HE.u11 * N - mu) / HBAR
    expected = psi * np.exp(-1j * rate * traj.times)
    assert np.max(np.abs(np.abs(traj.values[:, 0]) - psi)) / psi < 1e-8
    assert np.max(np.abs(traj.values[:, 0] - expected)) / psi < 1e-8
    assert np.all(traj.values[:, 1] == 0)


@pytest.mark.parametrize("population", [1.0, 0.5, 0.2])
def test_kappa1_matches_closed_form(population):
    inter = kappa1_interactions()
    init = MeanFieldState(complex(math.sqrt(N * population)), 1j * math.sqrt(N * (1 - population)))
    mu = N * inter.u11
    traj = evolve_mean_field(init, inter, OMEGA, mu, 1e-3, 2e-7)
    exact = kappa1_solution(init, inter.u11, mu, OMEGA, traj.times)
    assert np.max(np.abs(traj.values - exact)) / math.sqrt(N) < 1e-8


def test_kappa1_fourth_order_convergence():
    inter = kappa1_interactions()
    init = MeanFieldState(complex(math.sqrt(N)), 0j)
    mu = 0.0  # keep the global phase so the error is not trivially small
    errors = []
    for dt in (4e-7, 2e-7, 1e-7):
        traj = evolve_mean_field(init, inter, OMEGA, mu, 4e-4, dt)
        exact = kappa1_solution(init, inter.u11, mu, OMEGA, traj.times)
        errors.append(np.max(np.abs(traj.values - exact)))
    ratios = [errors[0] / errors[1], errors[1] / errors[2]]
    for r in ratios:
        assert 12 < r < 20


def test_norm_conserved_over_ten_periods(he_setup):
    inter = he_setup.interactions
    n = he_setup.background.n
    mu = he_setup.reference_mu
    g = he_setup.background.g
    dt = guard_dt(g, OMEGA, mu / HBAR, n * inter.u11 / HBAR)
    traj = evolve_mean_field(he_setup.initial, inter, OMEGA, mu, 10 * 150e-6, dt)
    dens = np.sum(np.abs(traj.values) ** 2, axis=1)
    assert np.max(np.abs(dens / dens[0] - 1)) < 1e-8


def test_step_guard():
    with pytest.raises(StepSizeError):
        evolve_mean_field(MeanFieldState(math.sqrt(N), 0j), HE, OMEGA, 0.0, 1e-4, 1e-6)
    with pytest.raises(StepSizeError):
        evolve_bloch(BlochVector(1.0, 0j), 0.0, OMEGA, 1e-3, 1e-5)
    with pytest.raises(StepSizeError):
        evolve_bloch(BlochVector(1.0, 0j), 0.0, OMEGA, 1e-3, 0.0)


def test_non_finite_state_reports_time():
    # y' = y^2 with y(0) = 1 blows up at t = 1
    with pytest.raises(NonFiniteStateError) as info, np.errstate(over="ignore", invalid="ignore"):
        rk4(lambda t, y: y * y, np.array([1.0]), 0.01, 1000)
    assert 0.9 < info.value.t < 1.5
    assert "t = " in str(info.value)


# -- Bloch equations ----------------------------------------------------------


def test_resonant_rabi():
    traj = evolve_bloch(BlochVector(1.0, 0j), 0.0, OMEGA, 1e-3, guard_dt(OMEGA))
    assert np.max(np.abs(traj.w - np.cos(2 * OMEGA * traj.times))) < 1e-8


def test_no_drive_keeps_population():
    start = BlochVector.from_angles(1.1, 0.4)
    g = 2 * math.pi * 5000.0
    traj = evolve_bloch(start, g, 0.0, 1e-3, guard_dt(g))
    assert np.max(np.abs(traj.w - start.w)) < 1e-14
    assert np.max(np.abs(np.abs(traj.rho10) - abs(start.rho10))) < 1e-10
    expected = start.rho10 * np.exp(-0.5j * g * (1 - start.w) * traj.times)
    assert np.max(np.abs(traj.rho10 - expected)) < 1e-8


def test_bloch_kernel_is_classical_rk4():
    states = oracles.bloch_state_grid(3, 2)
    g = 8 * OMEGA
    dt = guard_dt(g) / 2
    traj = evolve_bloch(states, g, OMEGA, 200 * dt, dt, substeps=1)
    _, ys = rk4(bloch_rhs(g, OMEGA), states, dt, 200)
    assert np.array_equal(traj.values[..., 0].real, ys[..., 0])
    assert np.array_equal(traj.values[..., 1].imag, ys[..., 2])


def test_substeps_converge_at_fourth_order():
    start = BlochVector.from_angles(0.7, 0.3)
    g = 8 * OMEGA
    dt = guard_dt(g)
    ref = evolve_bloch(start, g, OMEGA, 2e-3, dt, substeps=32).values[-1]
    err = [np.max(np.abs(evolve_bloch(start, g, OMEGA, 2e-3, dt, substeps=m).values[-1] - ref))
           for m in (1, 2)]
    assert 12 < err[0] / err[1] < 20


@pytest.mark.parametrize("ratio", [0, 1, 8, 100])
def test_bloch_trajectories_are_periodic(ratio):
    res = oracles.bloch_periodicity(ratio)
    assert res["return"] < 1e-4
    assert res["energy"] < 1e-8
    assert res["sphere"] < 1e-8
    if ratio == 0:
        # linear Rabi precession: every orbit has period pi / Omega
        assert res["periods"] == pytest.approx(math.pi / oracles.OMEGA, rel=1e-8)


def test_rejects_state_off_sphere():
    with pytest.raises(ValueError, match="sphere"):
        evolve_bloch(BlochVector(0.9, 0.0j), 0.0, OMEGA, 1e-4, 1e-6)


@pytest.mark.parametrize("ratio", [0.0, 1.0, 8.0, 100.0])
def test_bloch_conservation(ratio):
    g = ratio * OMEGA
    states = oracles.bloch_state_grid(4, 3)
    dt = guard_dt(g, OMEGA)
    traj = evolve_bloch(states, g, OMEGA, 20 * math.pi / OMEGA, dt)
    w = traj.values[..., 0].real
    rho = traj.values[..., 1]
    assert np.max(np.abs(w**2 + 4 * np.abs(rho) ** 2 - 1)) < 1e-8
    energy = -0.125 * HBAR * g * (1 - w) ** 2 + 2 * HBAR * OMEGA * rho.real
    assert np.max(np.abs(energy - energy[0])) < 1e-8 * HBAR * OMEGA


def test_energy_values():
    g = 8 * OMEGA
    assert energy_per_particle(BlochVector(1.0, 0j), g, OMEGA) == 0.0
    assert energy_per_particle(BlochVector(-1.0, 0j), g, OMEGA) == pytest.approx(-HBAR * g / 2, rel=1e-15)
    assert energy_per_particle(BlochVector(0.0, 0.5 + 0j), 0.0, OMEGA) == pytest.approx(HBAR * OMEGA)


def test_meanfield_and_bloch_agree(he_setup):
    inter = he_setup.interactions
    n = he_setup.background.n
    g = he_setup.background.g
    init = MeanFieldState(math.sqrt(0.7 * n) + 0j, math.sqrt(0.3 * n) * np.exp(0.4j))
    mu = n * inter.u11
    dt = 2e-7
    mf = evolve_mean_field(init, inter, OMEGA, mu, 1e-3, dt)
    b0 = bloch_from_meanfield(init)
    bl = evolve_bloch(b0, g, OMEGA, 1e-3, dt)
    assert np.max(np.abs(mf.w - bl.w)) < 1e-6
    assert np.max(np.abs(mf.rho10 - bl.rho10)) < 1e-6


# -- Bloch-sphere image -------------------------------------------------------


def test_bloch_image_cases():
    b = bloch_from_meanfield(MeanFieldState(2.0 + 0j, 0j))
    assert b.w == 1.0 and b.rho10 == 0
    b = bloch_from_meanfield(MeanFieldState(3.0 + 0j, 3.0 + 0j))
    assert b.w == 0.0 and b.rho10 == pytest.approx(0.5)
    with pytest.raises(ValueError):
        bloch_from_meanfield(MeanFieldState(0j, 0j))


@given(
    a=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
    b=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
    alpha=st.floats(min_value=-math.pi, max_value=math.pi),
)
def test_bloch_image_phase_invariant(a, b, alpha):
    if abs(a) ** 2 + abs(b) ** 2 < 1e-6:
        return
    phase = complex(math.cos(alpha), math.sin(alpha))
    one = bloch_from_meanfield(MeanFieldState(a, b))
    two = bloch_from_meanfield(MeanFieldState(a * phase, b * phase))
    assert two.w == pytest.approx(one.w, abs=1e-12)
    assert abs(two.rho10 - one.rho10) < 1e-12
    assert one.sphere_residual() < 1e-12


# -- fixed points -------------------------------------------------------------


def test_zero_nonlinearity_roots():
    fps = find_fixed_points(0.0, OMEGA)
    roots = sorted(fp.s for fp in fps)
    assert roots == pytest.approx([-1.0, 1.0], abs=1e-14)
    thetas = sorted(fp.theta for fp in fps)
    assert thetas == pytest.approx([-math.pi / 2, math.pi / 2], abs=1e-14)
    report = verify_no_attracting_fixed_points(fps, OMEGA)
    assert report.worst_real_part == 0.0


def test_unit_root_eigenvalues():
    fp = [f for f in find_fixed_points(0.0, OMEGA) if f.s > 0][0]
    lam = sorted(fp.lin_eigenvalues, key=lambda z: z.imag)
    assert lam[0] == pytest.approx(-2j * OMEGA, rel=1e-14)
    assert lam[1] == pytest.approx(2j * OMEGA, rel=1e-14)


def test_g8_roots_match_dense_scan():
    fps = find_fixed_points(8 * OMEGA, OMEGA)
    roots = sorted(fp.s for fp in fps)
    assert roots == pytest.approx(list(GOLDEN_ROOTS_G8), rel=1e-12)
    grid, step = oracles.dense_grid_roots(8.0)
    assert len(grid) == len(roots)
    for s, ref in zip(roots, grid):
        assert abs(s - ref) <= step
    np_roots = np.roots([1.0, 8.0, 0.0, 0.0, -1.0])
    real = np.sort(np_roots[np.abs(np_roots.imag) < 1e-12].real)
    assert roots == pytest.approx(list(real), rel=1e-12)
    verify_no_attracting_fixed_points(fps, OMEGA)


@given(ratio=st.floats(min_value=-200, max_value=200))
def test_roots_solve_fixed_point_equation(ratio):
    g = ratio * OMEGA
    fps = find_fixed_points(g, OMEGA)
    assert len(fps) == 2  # quartic s^4 + (g/Omega) s^3 - 1 has exactly two real roots
    for fp in fps:
        assert fixed_point_residual(fp.s, g, OMEGA) < 1e-10
        lam = fp.lin_eigenvalues
        assert lam[0] == -lam[1]
        assert abs(lam[0].real) < 1e-10 * OMEGA


def test_attracting_point_is_flagged():
    bad = FixedPoint(s=1.0, theta=math.pi / 2, lin_eigenvalues=(1e-6 * OMEGA + 2j * OMEGA, -1e-6 * OMEGA - 2j * OMEGA))
    with pytest.raises(AssertionError, match="s = 1.0"):
        verify_no_attracting_fixed_points([bad], OMEGA)


def test_fixed_point_is_stationary():
    g = 8 * OMEGA
    for fp in find_fixed_points(g, OMEGA):
        b = fp.bloch
        traj = evolve_bloch(b, g, OMEGA, 1e-3, guard_dt(g))
        assert np.max(np.abs(traj.w - b.w)) < 1e-9


# -- export -------------------------------------------------------------------


def test_trajectory_csv(tmp_path):
    traj = evolve_bloch(BlochVector(1.0, 0j), 0.0, OMEGA, 1e-5, 1e-6)
    path = tmp_path / "t.csv"
    write_trajectory_csv(traj, path, params={"g": 0.0}, header_lines=["manifest_sha256=abc"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# manifest_sha256=abc"
    assert lines[1] == "# g=0.0"
    assert lines[2] == "t,w,re_rho10,im_rho10"
    assert len(lines) == 3 + len(traj)
    assert lines[3].split(",")[1] == "1.000000000000e+00"
