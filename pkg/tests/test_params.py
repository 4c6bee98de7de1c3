import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bec_floquet.params import (
    HBAR,
    ConfigError,
    PhysicalConfig,
    derive_interactions,
    estimate_peak_density,
    load_config,
    nonlinear_rate,
    parse_config,
)

from .conftest import GOLDEN_MU_TF, GOLDEN_N_PEAK

lengths = st.floats(min_value=0.5e-9, max_value=20e-9)


def test_he_star_kappa():
    inter = derive_interactions(PhysicalConfig())
    assert round(inter.kappa, 2) == 0.74


def test_equal_lengths_give_kappa_one():
    inter = derive_interactions(PhysicalConfig(a00=7.51e-9))
    assert inter.kappa == 1.0


def test_half_length_gives_kappa_half():
    inter = derive_interactions(PhysicalConfig(a11=4e-9, a10=4e-9, a00=2e-9))
    assert inter.kappa == 0.5


def test_interaction_formula():
    cfg = PhysicalConfig()
    inter = derive_interactions(cfg)
    pref = 4 * math.pi * HBAR**2 / cfg.atom_mass
    assert inter.u11 == pref * cfg.a11
    assert inter.u10 == pref * cfg.a10
    assert inter.u00 == pref * cfg.a00
    assert inter.u == inter.u11


@pytest.mark.parametrize("a11", [0.0, -1e-9])
def test_rejects_nonpositive_a11(a11):
    with pytest.raises(ConfigError):
        PhysicalConfig(a11=a11)


@given(a00=lengths)
def test_homogeneous_in_a00(a00):
    one = derive_interactions(PhysicalConfig(a00=a00))
    two = derive_interactions(PhysicalConfig(a00=2 * a00))
    assert two.u00 == pytest.approx(2 * one.u00, rel=1e-14)
    assert two.kappa == pytest.approx(2 * one.kappa, rel=1e-14)


@given(a00=lengths)
def test_g_sign_follows_kappa(a00):
    cfg = PhysicalConfig(a00=a00)
    inter = derive_interactions(cfg)
    g = estimate_peak_density(cfg, inter).g
    if inter.kappa < 1:
        assert g > 0
    elif inter.kappa > 1:
        assert g < 0
    else:
        assert g == 0


@given(n=st.floats(min_value=0, max_value=1e21))
def test_g_matches_definition(n):
    inter = derive_interactions(PhysicalConfig())
    bg = estimate_peak_density(PhysicalConfig(), inter, density=n)
    assert bg.g == n * inter.u11 * (1 - inter.kappa) / HBAR
    assert bg.g == nonlinear_rate(n, inter)


@given(n=st.floats(min_value=0, max_value=1e21))
def test_kappa_one_has_no_nonlinear_rate(n):
    cfg = PhysicalConfig(a00=7.51e-9)
    assert estimate_peak_density(cfg, derive_interactions(cfg), density=n).g == 0.0


@given(number=st.floats(min_value=1e-6, max_value=1e7))
def test_density_scales_as_two_fifths_power(number):
    ref = PhysicalConfig()
    bg_ref = estimate_peak_density(ref, derive_interactions(ref))
    cfg = PhysicalConfig(atom_number=number)
    bg = estimate_peak_density(cfg, derive_interactions(cfg))
    assert bg.n == pytest.approx(bg_ref.n * (number / ref.atom_number) ** 0.4, rel=1e-12)
    assert bg.g == pytest.approx(bg_ref.g * (number / ref.atom_number) ** 0.4, rel=1e-12)


def test_empty_condensate_limit():
    cfg = PhysicalConfig(atom_number=0.0)
    bg = estimate_peak_density(cfg, derive_interactions(cfg))
    assert bg.n == 0.0
    assert bg.g == 0.0


def test_golden_peak_density():
    cfg = PhysicalConfig()
    bg = estimate_peak_density(cfg, derive_interactions(cfg))
    assert bg.n == pytest.approx(GOLDEN_N_PEAK, rel=1e-10)
    assert bg.mu_tf == pytest.approx(GOLDEN_MU_TF, rel=1e-10)


def test_pinned_density():
    cfg = PhysicalConfig()
    inter = derive_interactions(cfg)
    bg = estimate_peak_density(cfg, inter, density=5e19)
    assert bg.n == 5e19
    assert bg.mu_tf == 5e19 * inter.u11


def test_parse_units():
    cfg = parse_config("""
        # He* with a different drive
        rabi_frequency_hz = 1000
        a00_nm = 6.0
        omega_r = 100.0
        k_count = 17
    """)
    assert cfg.physical.rabi_frequency == pytest.approx(2 * math.pi * 1000)
    assert cfg.physical.a00 == pytest.approx(6e-9)
    assert cfg.physical.omega_r == 100.0
    assert cfg.numerics.k_count == 17
    assert cfg.physical.a11 == PhysicalConfig().a11


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("colour = red", "unknown key"),
        ("omega_r = 1\nomega_r_hz = 2", "duplicates"),
        ("a00_nm = lots", "bad value"),
        ("a00_nm 5", "expected"),
        ("k_min = 5\nk_max = 1", "k_min"),
        ("twa_points = 1000", "power of two"),
        ("a11_nm = 0", "a11"),
        ("rabi_frequency_hz = -3", "rabi_frequency"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.cfg")
