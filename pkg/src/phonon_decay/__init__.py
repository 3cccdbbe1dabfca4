"""Phonon-mediated transitions of an atom in a surface-induced potential."""

__version__ = "0.1.0"

from .config import Config, ConfigError, DebyeSolid, default_config, load_config  # noqa: E402
from .potential import PotentialParams, SurfacePotential  # noqa: E402
from .spectrum import SpectrumCatalog, solve_bound_spectrum  # noqa: E402

__all__ = [
    "Config",
    "ConfigError",
    "DebyeSolid",
    "PotentialParams",
    "SpectrumCatalog",
    "SurfacePotential",
    "default_config",
    "load_config",
    "solve_bound_spectrum",
]
