import math

import hypothesis
import numpy as np
import pytest

from bec_floquet import pipeline
from bec_floquet.params import NumericsConfig, PhysicalConfig, RunConfig

hypothesis.settings.register_profile("default", max_examples=25, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile("default")

# Thomas-Fermi peak density of the He* configuration, frozen from the
# standalone quadrature oracle in scripts/tf_density_oracle.py
GOLDEN_N_PEAK = 7.682206079355e19  # m^-3
GOLDEN_MU_TF = 1.213095709547e-29  # J

# roots of g s^3 = Omega (1 - s^4) for g / Omega = 8 from an independent
# 10^6-point grid scan and numpy.roots (the two agree to 1e-12)
GOLDEN_ROOTS_G8 = (-8.001951696232172, 0.49018603141949957)


def kappa1_config(**numerics) -> RunConfig:
    phys = PhysicalConfig()
    return RunConfig(physical=PhysicalConfig(a00=phys.a11), numerics=NumericsConfig(**numerics))


@pytest.fixture(scope="session")
def he_setup():
    return pipeline.prepare(RunConfig())


@pytest.fixture(scope="session")
def he_period(he_setup):
    return pipeline.run_period(he_setup)


@pytest.fixture(scope="session")
def he_background(he_setup, he_period):
    return pipeline.run_background(he_setup, he_period.estimate)


@pytest.fixture(scope="session")
def he_spectrum(he_setup, he_period):
    return pipeline.run_spectrum(he_setup, he_period.estimate, threads=1)


@pytest.fixture(scope="session")
def k1_setup():
    return pipeline.prepare(kappa1_config())


@pytest.fixture(scope="session")
def k1_period(k1_setup):
    return pipeline.run_period(k1_setup)


@pytest.fixture(scope="session")
def k1_spectrum(k1_setup, k1_period):
    return pipeline.run_spectrum(k1_setup, k1_period.estimate, threads=1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def two_pi():
    return 2.0 * math.pi
