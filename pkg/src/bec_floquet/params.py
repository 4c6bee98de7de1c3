"""Physical configuration, interaction strengths and background density.

All quantities are SI unless a key name carries an explicit unit suffix
(``*_hz`` for cyclic frequencies, ``*_nm`` for lengths, ``*_um`` for
micrometres).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

HBAR = 1.054571817e-34  # J s
HE_STAR_MASS = 6.6465e-27  # kg, 4He 2^3S_1


class ConfigError(ValueError):
    """Invalid configuration value or unreadable config file."""


@dataclass(frozen=True)
class PhysicalConfig:
    atom_mass: float = HE_STAR_MASS
    atom_number: float = 2.0e6
    omega_r: float = 2 * math.pi * 1020.0
    omega_z: float = 2 * math.pi * 55.0
    rabi_frequency: float = 2 * math.pi * 3.0e3
    a11: float = 7.51e-9
    a10: float = 7.51e-9
    a00: float = 5.56e-9
    hbar: float = HBAR

    def __post_init__(self):
        for name in ("atom_mass", "omega_r", "omega_z", "rabi_frequency", "hbar"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be finite and > 0, got {value!r}")
        if not (math.isfinite(self.atom_number) and self.atom_number >= 0):
            raise ConfigError(f"atom_number must be >= 0, got {self.atom_number!r}")
        if not (math.isfinite(self.a11) and self.a11 > 0):
            raise ConfigError(f"a11 must be > 0 (kappa undefined), got {self.a11!r}")
        if not (math.isfinite(self.a10) and math.isfinite(self.a00)):
            raise ConfigError("scattering lengths must be finite")


@dataclass(frozen=True)
class InteractionSet:
    u11: float
    u10: float
    u00: float
    kappa: float

    @property
    def u(self) -> float:
        """The single interaction strength U = U11 = U10 of the two-state model."""
        return self.u11


@dataclass(frozen=True)
class BackgroundDensity:
    n: float
    g: float
    mu_tf: float


def derive_interactions(config: PhysicalConfig) -> InteractionSet:
    """U_ij = 4 pi hbar^2 a_ij / M and kappa = U00 / U11."""
    if not config.a11 > 0:
        raise ConfigError("a11 must be > 0 (kappa undefined)")
    pref = 4 * math.pi * config.hbar**2 / config.atom_mass
    u11 = pref * config.a11
    u10 = pref * config.a10
    u00 = pref * config.a00
    return InteractionSet(u11=u11, u10=u10, u00=u00, kappa=u00 / u11)


def nonlinear_rate(n: float, interactions: InteractionSet, hbar: float = HBAR) -> float:
    """g = n U (1 - kappa) / hbar in rad/s."""
    return n * interactions.u11 * (1.0 - interactions.kappa) / hbar


def estimate_peak_density(
    config: PhysicalConfig, interactions: InteractionSet, density: float | None = None
) -> BackgroundDensity:
    """Thomas-Fermi peak density of a single-component condensate.

    ``mu_tf = (hbar wbar / 2) (15 N a11 / abar)^(2/5)`` with the geometric
    mean trap frequency ``wbar`` and oscillator length ``abar``; the peak
    density is ``mu_tf / U11``. Passing ``density`` pins n directly (the
    chemical potential is then ``n U11``).
    """
    hbar = config.hbar
    if density is not None:
        if not (math.isfinite(density) and density >= 0):
            raise ConfigError(f"density must be >= 0, got {density!r}")
        n = float(density)
        mu = n * interactions.u11
    else:
        wbar = (config.omega_r**2 * config.omega_z) ** (1.0 / 3.0)
        abar = math.sqrt(hbar / (config.atom_mass * wbar))
        mu = 0.5 * hbar * wbar * (15.0 * config.atom_number * config.a11 / abar) ** 0.4
        n = mu / interactions.u11
    return BackgroundDensity(n=n, g=nonlinear_rate(n, interactions, hbar), mu_tf=mu)


def thomas_fermi_radii(config: PhysicalConfig, background: BackgroundDensity) -> tuple[float, float]:
    """Radial and axial Thomas-Fermi radii (m) for the chemical potential in ``background``."""
    m = config.atom_mass
    r_r = math.sqrt(2 * background.mu_tf / (m * config.omega_r**2))
    r_z = math.sqrt(2 * background.mu_tf / (m * config.omega_z**2))
    return r_r, r_z


# ---------------------------------------------------------------------------
# Run configuration file
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NumericsConfig:
    """Numerical knobs shared by the command-line pipeline."""

    density: float | None = None  # m^-3; None -> Thomas-Fermi peak density
    initial_population: float = 1.0  # fraction of atoms initially in state |1>
    reference_offset: str = "chemical"  # "chemical" (mu0 = n U) or "zero"
    dt: float = 2.0e-7  # s, mean-field step for the period search
    t_final: float = 1.0e-2  # s, mean-field record length
    steps_per_period: int = 2000
    k_min: float = 0.0
    k_max: float = 3.0e6
    k_count: int = 200
    gamma_tol_fraction: float = 1.0e-3
    twa_points: int = 2048
    twa_length: float = 1.6e-3  # m
    twa_t_final: float = 2.0e-3
    twa_dt: float | None = None  # None -> largest step allowed by the kinetic bound
    twa_realizations: int = 500
    twa_save_interval: float = 5.0e-5
    twa_area: float | None = None  # m^2, 1D reduction area; None -> pi R_r^2 / 2

    def __post_init__(self):
        if self.reference_offset not in ("chemical", "zero"):
            raise ConfigError("reference_offset must be 'chemical' or 'zero'")
        if not 0.0 <= self.initial_population <= 1.0:
            raise ConfigError("initial_population must lie in [0, 1]")
        for name in ("dt", "t_final", "twa_length", "twa_t_final", "twa_save_interval"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        for name in ("steps_per_period", "k_count", "twa_points", "twa_realizations"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.twa_points & (self.twa_points - 1):
            raise ConfigError(f"twa_points must be a power of two, got {self.twa_points}")
        if self.k_min < 0 or self.k_min >= self.k_max:
            raise ConfigError(f"need 0 <= k_min < k_max, got {self.k_min} and {self.k_max}")


@dataclass(frozen=True)
class RunConfig:
    physical: PhysicalConfig = field(default_factory=PhysicalConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)

    def as_dict(self) -> dict:
        out = {f"physical.{f.name}": getattr(self.physical, f.name) for f in fields(self.physical)}
        out.update({f"numerics.{f.name}": getattr(self.numerics, f.name) for f in fields(self.numerics)})
        return out


_TWO_PI = 2 * math.pi

# key -> (target dataclass, field name, converter to SI)
_KEYS: dict[str, tuple[str, str, object]] = {
    "atom_mass": ("physical", "atom_mass", float),
    "atom_number": ("physical", "atom_number", float),
    "omega_r": ("physical", "omega_r", float),
    "omega_r_hz": ("physical", "omega_r", lambda v: _TWO_PI * float(v)),
    "omega_z": ("physical", "omega_z", float),
    "omega_z_hz": ("physical", "omega_z", lambda v: _TWO_PI * float(v)),
    "rabi_frequency": ("physical", "rabi_frequency", float),
    "rabi_frequency_hz": ("physical", "rabi_frequency", lambda v: _TWO_PI * float(v)),
    "a11_nm": ("physical", "a11", lambda v: 1e-9 * float(v)),
    "a10_nm": ("physical", "a10", lambda v: 1e-9 * float(v)),
    "a00_nm": ("physical", "a00", lambda v: 1e-9 * float(v)),
    "hbar": ("physical", "hbar", float),
    "density": ("numerics", "density", float),
    "initial_population": ("numerics", "initial_population", float),
    "reference_offset": ("numerics", "reference_offset", str),
    "dt": ("numerics", "dt", float),
    "t_final": ("numerics", "t_final", float),
    "steps_per_period": ("numerics", "steps_per_period", int),
    "k_min": ("numerics", "k_min", float),
    "k_max": ("numerics", "k_max", float),
    "k_count": ("numerics", "k_count", int),
    "gamma_tol_fraction": ("numerics", "gamma_tol_fraction", float),
    "twa_points": ("numerics", "twa_points", int),
    "twa_length_um": ("numerics", "twa_length", lambda v: 1e-6 * float(v)),
    "twa_t_final": ("numerics", "twa_t_final", float),
    "twa_dt": ("numerics", "twa_dt", float),
    "twa_realizations": ("numerics", "twa_realizations", int),
    "twa_save_interval": ("numerics", "twa_save_interval", float),
    "twa_area": ("numerics", "twa_area", float),
}

CONFIG_KEYS = tuple(_KEYS)


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse the flat ``key = value`` format. Unknown or repeated keys are errors."""
    base = base or RunConfig()
    updates: dict[str, dict] = {"physical": {}, "numerics": {}}
    seen: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        target, name, convert = _KEYS[key]
        if name in seen:
            raise ConfigError(f"line {lineno}: {key!r} duplicates {seen[name]!r}")
        seen[name] = key
        try:
            updates[target][name] = convert(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {value!r}") from exc
    try:
        physical = replace(base.physical, **updates["physical"])
        numerics = replace(base.numerics, **updates["numerics"])
    except TypeError as exc:  # pragma: no cover - guarded by _KEYS
        raise ConfigError(str(exc)) from exc
    return RunConfig(physical=physical, numerics=numerics)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror or exc}") from exc
    return parse_config(text)


def he_star_config() -> PhysicalConfig:
    """Metastable helium parameters (trap, Rabi drive, scattering lengths) used throughout."""
    return PhysicalConfig()
