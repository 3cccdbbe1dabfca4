"""Run configuration: a flat ``key = value unit`` text format.

Example::

    # silica / cesium
    c3 = 1.56 kHz um^3
    atom_mass = 2.21e-25 kg
    box_length = 1 mm

Everything is converted to internal units on parse (see :mod:`phonon_decay.units`).
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import units as u
from .potential import PotentialParams


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class DebyeSolid:
    """Debye-model solid plus the temperature of its phonon bath.

    ``number_density`` is N/V. The derived Debye wavenumber, frequency and
    temperature are filled in on construction.
    """

    mass: float
    number_density: float
    sound_velocity: float
    temperature: float
    q_debye: float = field(init=False)
    omega_debye: float = field(init=False)
    t_debye: float = field(init=False)

    def __post_init__(self):
        for name in ("mass", "number_density", "sound_velocity"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not self.temperature >= 0:
            raise ConfigError("temperature must be non-negative")
        q, w, t = solid_derive(self.mass, self.number_density, self.sound_velocity)
        object.__setattr__(self, "q_debye", q)
        object.__setattr__(self, "omega_debye", w)
        object.__setattr__(self, "t_debye", t)

    @classmethod
    def from_mass_density(cls, mass, mass_density, sound_velocity, temperature):
        return cls(mass, mass_density / mass, sound_velocity, temperature)

    @property
    def mass_density(self):
        return self.mass * self.number_density

    def at_temperature(self, temperature: float) -> "DebyeSolid":
        return DebyeSolid(self.mass, self.number_density, self.sound_velocity, temperature)


def solid_derive(mass: float, number_density: float, sound_velocity: float):
    """Debye wavenumber, angular frequency and temperature of a solid.

    ``mass`` does not enter the Debye quantities; it is accepted so the call
    mirrors the solid's full parameter set.
    """
    if not (mass > 0 and number_density > 0 and sound_velocity > 0):
        raise ConfigError("solid parameters must be positive")
    q_d = (6.0 * math.pi**2 * number_density) ** (1.0 / 3.0)
    omega_d = sound_velocity * q_d
    t_d = u.HBAR * omega_d / u.K_B
    return q_d, omega_d, t_d


# key -> (expected dimension, serialization unit, required)
_SCHEMA: dict[str, tuple[tuple[int, ...], str, bool]] = {
    "c3": (u.ENERGY_LENGTH3, "Hz m^3", True),
    "a_repulsion": (u.ENERGY, "Hz", True),
    "alpha": (u.INV_LENGTH, "m^-1", True),
    "atom_mass": (u.MASS, "kg", True),
    "solid_mass": (u.MASS, "kg", True),
    "solid_density": (u.MASS_DENSITY, "kg/m^3", True),
    "sound_velocity": (u.VELOCITY, "m/s", True),
    "bath_temperature": (u.TEMPERATURE, "K", True),
    "gas_temperature": (u.TEMPERATURE, "K", True),
    "box_length": (u.LENGTH, "m", True),
    "x_outer": (u.LENGTH, "m", True),
    "step_points_per_wavelength": (u.DIMENSIONLESS, "", True),
    "continuum_emax": (u.ENERGY, "Hz", True),
    "continuum_mesh": (u.DIMENSIONLESS, "", True),
    "laguerre_order": (u.DIMENSIONLESS, "", True),
    "inner_wall": (u.LENGTH, "m", False),
    "target_level": (u.DIMENSIONLESS, "", False),
}
_PATH_KEYS = ("catalog_path", "out_dir")
_INT_KEYS = ("step_points_per_wavelength", "continuum_mesh", "laguerre_order", "target_level")


@dataclass(frozen=True)
class Config:
    potential: PotentialParams
    solid: DebyeSolid
    gas_temperature: float
    box_length: float
    x_outer: float
    step_points_per_wavelength: int = 40
    continuum_emax: float = u.from_hz(20e6)
    continuum_mesh: int = 64
    laguerre_order: int = 48
    inner_wall: float | None = None
    target_level: int | None = 300
    catalog_path: str = "catalog.bin"
    out_dir: str = "out"

    def __post_init__(self):
        for name in ("gas_temperature", "box_length", "x_outer", "continuum_emax"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("step_points_per_wavelength", "continuum_mesh", "laguerre_order"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.box_length <= self.x_outer:
            raise ConfigError("box_length must exceed x_outer")
        if self.inner_wall is not None and not self.inner_wall > 0:
            raise ConfigError("inner_wall must be positive")

    def replace(self, **changes) -> "Config":
        return dataclasses.replace(self, **changes)

    def with_bath_temperature(self, temperature: float) -> "Config":
        return self.replace(solid=self.solid.at_temperature(temperature))

    def spectrum_hash(self) -> str:
        """Hash of the inputs that determine the bound spectrum."""
        keys = ("c3", "a_repulsion", "alpha", "atom_mass", "x_outer",
                "step_points_per_wavelength", "inner_wall", "target_level")
        return _digest({k: v for k, v in _flat_values(self).items() if k in keys})

    def physics_hash(self) -> str:
        return _digest({k: v for k, v in _flat_values(self).items() if k not in _PATH_KEYS})


def _digest(values: dict) -> str:
    # 12 significant digits absorb unit-conversion rounding
    text = "\n".join(f"{k}={v:.12g}" if isinstance(v, float) else f"{k}={v!r}"
                     for k, v in sorted(values.items()))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _flat_values(cfg: Config) -> dict:
    p, s = cfg.potential, cfg.solid
    return {
        "c3": p.c3,
        "a_repulsion": p.a_repulsion,
        "alpha": p.alpha,
        "atom_mass": p.mass,
        "solid_mass": s.mass,
        "solid_density": s.mass_density,
        "sound_velocity": s.sound_velocity,
        "bath_temperature": s.temperature,
        "gas_temperature": cfg.gas_temperature,
        "box_length": cfg.box_length,
        "x_outer": cfg.x_outer,
        "step_points_per_wavelength": cfg.step_points_per_wavelength,
        "continuum_emax": cfg.continuum_emax,
        "continuum_mesh": cfg.continuum_mesh,
        "laguerre_order": cfg.laguerre_order,
        "inner_wall": cfg.inner_wall,
        "target_level": cfg.target_level,
        "catalog_path": cfg.catalog_path,
        "out_dir": cfg.out_dir,
    }


def _parse_lines(text: str) -> dict[str, str]:
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in entries:
            raise ConfigError(f"{key}: duplicate key")
        entries[key] = value
    return entries


def _quantity(key: str, value: str):
    dim, _, _ = _SCHEMA[key]
    parts = value.split(None, 1)
    try:
        number = float(parts[0])
    except (ValueError, IndexError):
        raise ConfigError(f"{key}: cannot parse number from {value!r}") from None
    unit = parts[1] if len(parts) > 1 else ""
    try:
        result = u.to_internal(number, unit, dim)
    except u.UnitError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    if key in _INT_KEYS:
        if result != int(result):
            raise ConfigError(f"{key}: expected an integer")
        return int(result)
    return result


def parse_config(text: str) -> Config:
    """Parse a configuration document into a :class:`Config` in internal units."""
    entries = _parse_lines(text)
    unknown = set(entries) - set(_SCHEMA) - set(_PATH_KEYS)
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown key")
    values = {}
    for key, (_, _, required) in _SCHEMA.items():
        if key not in entries:
            if required:
                raise ConfigError(f"{key}: missing key")
            continue
        values[key] = _quantity(key, entries[key])
        if not values[key] > 0:
            raise ConfigError(f"{key}: must be positive")

    try:
        potential = PotentialParams(values["c3"], values["a_repulsion"], values["alpha"], values["atom_mass"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        solid = DebyeSolid.from_mass_density(
            values["solid_mass"], values["solid_density"], values["sound_velocity"], values["bath_temperature"]
        )
    except ConfigError as exc:
        raise ConfigError(f"solid: {exc}") from None
    return Config(
        potential=potential,
        solid=solid,
        gas_temperature=values["gas_temperature"],
        box_length=values["box_length"],
        x_outer=values["x_outer"],
        step_points_per_wavelength=values["step_points_per_wavelength"],
        continuum_emax=values["continuum_emax"],
        continuum_mesh=values["continuum_mesh"],
        laguerre_order=values["laguerre_order"],
        inner_wall=values.get("inner_wall"),
        target_level=values.get("target_level"),
        catalog_path=entries.get("catalog_path", "catalog.bin"),
        out_dir=entries.get("out_dir", "out"),
    )


def serialize_config(cfg: Config) -> str:
    lines = []
    for key, value in _flat_values(cfg).items():
        if value is None:
            continue
        if key in _PATH_KEYS:
            lines.append(f"{key} = {value}")
            continue
        unit = _SCHEMA[key][1]
        scale, _ = u.parse_unit(unit)
        number = value if key in _INT_KEYS else value / scale
        lines.append(f"{key} = {number!r} {unit}".rstrip())
    return "\n".join(lines) + "\n"


def load_config(path) -> Config:
    return parse_config(Path(path).read_text())


def default_config_text() -> str:
    return resources.files("phonon_decay").joinpath("data/silica_cesium.cfg").read_text()


def default_config() -> Config:
    """Silica surface, ground-state cesium, 300 K bath."""
    return parse_config(default_config_text())
