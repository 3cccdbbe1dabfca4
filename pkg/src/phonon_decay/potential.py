"""Surface-induced atom potential and its geometric features.

All energies are angular frequencies (rad/s); see :mod:`phonon_decay.units`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import units as u

_ROOT_RTOL = 1e-12


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class PotentialParams:
    """``U(x) = a_repulsion * exp(-alpha x) - c3 / x^3`` for an atom of ``mass``."""

    c3: float
    a_repulsion: float
    alpha: float
    mass: float

    def __post_init__(self):
        for name in ("c3", "a_repulsion", "alpha", "mass"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


class Potential:
    """Interface consumed by the Schrodinger solver.

    Subclasses provide the potential, its gradient, the hard-wall position and
    a smooth grid-density function ``g(x) >= k(x)^2`` (m^-2) together with its
    first two derivatives; the solver places nodes so that the step tracks
    ``2 pi / sqrt(g)``.
    """

    mass: float
    x_wall: float

    def __call__(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def grid_density(self, x, e_floor):
        raise NotImplementedError

    def density_terms(self, e_floor: float):
        """``(c3, a, alpha, const)`` with ``g / k_factor = c3/x^3 + a e^(-alpha x) + const``.

        Potentials whose grid density has this form get compiled node
        placement; others return ``None`` and fall back to an ODE solver.
        """
        return None

    def density_scalar(self, x: float, e_floor: float) -> float:
        return float(self.grid_density(np.asarray([x]), e_floor)[0][0])

    def well_minimum(self) -> float:
        raise NotImplementedError

    def threshold(self) -> float:
        """Energy separating bound levels from the continuum."""
        return 0.0

    def asymptotic_start(self, level: float) -> float:
        """Smallest x beyond which ``|U| <= level`` (level > 0)."""
        raise NotImplementedError

    @property
    def k_factor(self) -> float:
        """2m/hbar: converts an energy gap (rad/s) to k^2 (m^-2)."""
        return 2.0 * self.mass / u.HBAR


class SurfacePotential(Potential):
    """Van der Waals attraction plus exponential short-range repulsion."""

    def __init__(self, params: PotentialParams, inner_wall: float | None = None):
        self.params = params
        self.mass = params.mass
        self._x_barrier, self._x_min = _extrema(params)
        self.x_wall = inner_wall if inner_wall is not None else self._x_barrier

    def __call__(self, x):
        x = _check_positive(x)
        p = self.params
        return p.a_repulsion * np.exp(-p.alpha * x) - p.c3 / x**3

    def gradient(self, x):
        x = _check_positive(x)
        p = self.params
        return -p.alpha * p.a_repulsion * np.exp(-p.alpha * x) + 3.0 * p.c3 / x**4

    def grid_density(self, x, e_floor):
        p = self.params
        c = self.k_factor
        rep = p.a_repulsion * np.exp(-p.alpha * x)
        g = c * (p.c3 / x**3 + rep + e_floor)
        dg = c * (-3.0 * p.c3 / x**4 - p.alpha * rep)
        d2g = c * (12.0 * p.c3 / x**5 + p.alpha**2 * rep)
        return g, dg, d2g

    def density_terms(self, e_floor: float):
        p = self.params
        return p.c3, p.a_repulsion, p.alpha, e_floor

    def well_minimum(self) -> float:
        return self._x_min

    def asymptotic_start(self, level: float) -> float:
        x_lo = self._x_min
        x_hi = max(2.0 * x_lo, 2.0 * (self.params.c3 / level) ** (1.0 / 3.0))
        return _bisect(lambda x: abs(float(self(x))) - level, x_lo, x_hi)

    @property
    def barrier_position(self) -> float:
        return self._x_barrier

    def rightmost_crossing(self, energy: float) -> float:
        """Largest x with U(x) = energy, for a bound-level energy."""
        u_min = float(self(self._x_min))
        if not energy < 0:
            raise DomainError("rightmost crossing needs a negative energy")
        if energy < u_min:
            raise DomainError("energy lies below the well minimum")
        x_lo = self._x_min
        x_hi = max(2.0 * x_lo, (self.params.c3 / -energy) ** (1.0 / 3.0))
        while self(x_hi) < energy:
            x_hi *= 2.0
        return _bisect(lambda x: float(self(x)) - energy, x_lo, x_hi)


def inner_wall(params: PotentialParams) -> float:
    """Position of the potential maximum that shields the x -> 0 divergence."""
    return _extrema(params)[0]


def _extrema(params: PotentialParams):
    def du(x):
        return -params.alpha * params.a_repulsion * math.exp(-params.alpha * x) + 3.0 * params.c3 / x**4

    # the repulsion length scale bounds the search window
    xs = np.geomspace(1e-4 / params.alpha, 1e4 / params.alpha, 4001)
    signs = np.sign([du(x) for x in xs])
    changes = np.nonzero(np.diff(signs))[0]
    if len(changes) < 2 or signs[changes[0]] < 0:
        raise DomainError("potential has no interior barrier maximum; cannot place the inner wall")
    i, j = changes[0], changes[1]
    return _bisect(du, xs[i], xs[i + 1]), _bisect(du, xs[j], xs[j + 1])


def _bisect(f, a, b):
    return brentq(f, a, b, xtol=1e-300, rtol=_ROOT_RTOL, maxiter=500)


def _check_positive(x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("the potential is defined for x > 0 only")
    return arr if arr.ndim else float(arr)


class HarmonicPotential(Potential):
    """Harmonic well ``m w^2 (x - x0)^2 / 2hbar`` between hard walls.

    Used to check the solver and the force matrix elements against the
    analytic oscillator.
    """

    def __init__(self, mass: float, omega: float, x0: float, half_width: float):
        self.mass = mass
        self.omega = omega
        self.x0 = x0
        self.x_wall = x0 - half_width
        self.x_right = x0 + half_width

    def __call__(self, x):
        return 0.5 * self.mass * self.omega**2 * (np.asarray(x) - self.x0) ** 2 / u.HBAR

    def gradient(self, x):
        return self.mass * self.omega**2 * (np.asarray(x) - self.x0) / u.HBAR

    def grid_density(self, x, e_floor):
        top = float(self(self.x_right))
        g = np.full_like(np.asarray(x, dtype=float), self.k_factor * (top + e_floor))
        return g, np.zeros_like(g), np.zeros_like(g)

    def well_minimum(self) -> float:
        return self.x0

    def threshold(self) -> float:
        return float(self(self.x_right))

    def density_terms(self, e_floor: float):
        return 0.0, 0.0, 0.0, float(self(self.x_right)) + e_floor


class FreePotential(Potential):
    """U = 0 with a hard wall at ``x_wall``; the analytic continuum reference."""

    def __init__(self, mass: float, x_wall: float = 0.0):
        self.mass = mass
        self.x_wall = x_wall

    def __call__(self, x):
        return np.zeros_like(np.asarray(x, dtype=float)) + 0.0

    def gradient(self, x):
        return np.zeros_like(np.asarray(x, dtype=float)) + 0.0

    def grid_density(self, x, e_floor):
        g = np.full_like(np.asarray(x, dtype=float), self.k_factor * e_floor)
        return g, np.zeros_like(g), np.zeros_like(g)

    def well_minimum(self) -> float:
        return self.x_wall

    def density_terms(self, e_floor: float):
        return 0.0, 0.0, 0.0, e_floor

    def asymptotic_start(self, level: float) -> float:
        return self.x_wall
