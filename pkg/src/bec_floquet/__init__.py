"""Floquet stability toolkit for a Rabi-coupled two-state Bose-Einstein condensate."""

__version__ = "0.1.0"

from .params import (  # noqa: E402
    ConfigError,
    InteractionSet,
    PhysicalConfig,
    RunConfig,
    derive_interactions,
    estimate_peak_density,
    load_config,
    parse_config,
)
from .meanfield import (  # noqa: E402
    BlochVector,
    MeanFieldState,
    Trajectory,
    evolve_bloch,
    evolve_mean_field,
    find_fixed_points,
)
from .period import PeriodEstimate, detect_period, verify_periodicity  # noqa: E402
from .floquet import (  # noqa: E402
    FloquetSpectrum,
    MonodromyResult,
    build_generator,
    check_eigenvalue_symmetry,
    floquet_exponents,
    monodromy,
    predicted_gain,
    scan_spectrum,
)

__all__ = [
    "ConfigError", "InteractionSet", "PhysicalConfig", "RunConfig", "derive_interactions",
    "estimate_peak_density", "load_config", "parse_config", "BlochVector", "MeanFieldState",
    "Trajectory", "evolve_bloch", "evolve_mean_field", "find_fixed_points", "PeriodEstimate",
    "detect_period", "verify_periodicity", "FloquetSpectrum", "MonodromyResult", "build_generator",
    "check_eigenvalue_symmetry", "floquet_exponents", "monodromy", "predicted_gain", "scan_spectrum",
]
