"""Physical constants and the external/internal unit conventions.

Internally every energy is an angular frequency (rad/s, i.e. E/hbar), lengths
are meters, times are seconds and temperatures kelvin. Configuration files and
reports quote energies as ordinary frequencies (Hz, i.e. E/h), which is the
convention used throughout the surface-physics literature for these numbers.
"""

from __future__ import annotations

import math
import re

from scipy import constants as _c

HBAR = _c.hbar
H_PLANCK = _c.h
K_B = _c.k
AMU = _c.atomic_mass
TWO_PI = 2.0 * math.pi

# dimension vectors: (energy, length, mass, time, temperature)
_DIM_NAMES = ("energy", "length", "mass", "time", "temperature")

# scale converts an external value to internal units (energy -> rad/s)
_BASE_UNITS: dict[str, tuple[float, tuple[int, int, int, int, int]]] = {
    "Hz": (TWO_PI, (1, 0, 0, 0, 0)),
    "kHz": (TWO_PI * 1e3, (1, 0, 0, 0, 0)),
    "MHz": (TWO_PI * 1e6, (1, 0, 0, 0, 0)),
    "GHz": (TWO_PI * 1e9, (1, 0, 0, 0, 0)),
    "THz": (TWO_PI * 1e12, (1, 0, 0, 0, 0)),
    "km": (1e3, (0, 1, 0, 0, 0)),
    "m": (1.0, (0, 1, 0, 0, 0)),
    "cm": (1e-2, (0, 1, 0, 0, 0)),
    "mm": (1e-3, (0, 1, 0, 0, 0)),
    "um": (1e-6, (0, 1, 0, 0, 0)),
    "μm": (1e-6, (0, 1, 0, 0, 0)),
    "nm": (1e-9, (0, 1, 0, 0, 0)),
    "pm": (1e-12, (0, 1, 0, 0, 0)),
    "kg": (1.0, (0, 0, 1, 0, 0)),
    "g": (1e-3, (0, 0, 1, 0, 0)),
    "amu": (AMU, (0, 0, 1, 0, 0)),
    "u": (AMU, (0, 0, 1, 0, 0)),
    "s": (1.0, (0, 0, 0, 1, 0)),
    "ms": (1e-3, (0, 0, 0, 1, 0)),
    "us": (1e-6, (0, 0, 0, 1, 0)),
    "ns": (1e-9, (0, 0, 0, 1, 0)),
    "K": (1.0, (0, 0, 0, 0, 1)),
    "mK": (1e-3, (0, 0, 0, 0, 1)),
    "uK": (1e-6, (0, 0, 0, 0, 1)),
    "μK": (1e-6, (0, 0, 0, 0, 1)),
    "nK": (1e-9, (0, 0, 0, 0, 1)),
}

DIMENSIONLESS = (0, 0, 0, 0, 0)
ENERGY = (1, 0, 0, 0, 0)
LENGTH = (0, 1, 0, 0, 0)
INV_LENGTH = (0, -1, 0, 0, 0)
MASS = (0, 0, 1, 0, 0)
TEMPERATURE = (0, 0, 0, 0, 1)
VELOCITY = (0, 1, 0, -1, 0)
MASS_DENSITY = (0, -3, 1, 0, 0)
ENERGY_LENGTH3 = (1, 3, 0, 0, 0)

_TOKEN = re.compile(r"^([A-Za-zμ]+)(?:\^(-?\d+))?$")


class UnitError(ValueError):
    """Raised for unparseable or dimensionally wrong unit suffixes."""


def parse_unit(text: str) -> tuple[float, tuple[int, ...]]:
    """Return ``(scale, dimension)`` for a unit expression like ``kHz um^3``.

    Factors are separated by whitespace, ``*`` or ``/``; everything after a
    ``/`` is in the denominator. ``1/nm`` and ``nm^-1`` are equivalent.
    """
    text = text.strip()
    if not text:
        return 1.0, DIMENSIONLESS
    scale = 1.0
    dim = [0, 0, 0, 0, 0]
    sign = 1
    for piece in re.split(r"(\s+|\*|/)", text):
        if piece is None or not piece.strip():
            continue
        piece = piece.strip()
        if piece == "*":
            continue
        if piece == "/":
            sign = -1
            continue
        if piece == "1":
            continue
        match = _TOKEN.match(piece)
        if match is None or match.group(1) not in _BASE_UNITS:
            raise UnitError(f"unknown unit {piece!r}")
        base_scale, base_dim = _BASE_UNITS[match.group(1)]
        power = sign * int(match.group(2) or 1)
        scale *= base_scale**power
        for i, d in enumerate(base_dim):
            dim[i] += power * d
    return scale, tuple(dim)


def to_internal(value: float, unit: str, expected: tuple[int, ...] | None = None) -> float:
    scale, dim = parse_unit(unit)
    if expected is not None and dim != tuple(expected):
        raise UnitError(f"unit {unit!r} has dimension {describe(dim)}, expected {describe(expected)}")
    return value * scale


def from_internal(value: float, unit: str) -> float:
    scale, _ = parse_unit(unit)
    return value / scale


def describe(dim) -> str:
    parts = [f"{n}^{d}" if d != 1 else n for n, d in zip(_DIM_NAMES, dim) if d]
    return " ".join(parts) or "dimensionless"


def hz(omega):
    """Internal angular frequency -> ordinary frequency (Hz)."""
    return omega / TWO_PI


def from_hz(f):
    return f * TWO_PI
