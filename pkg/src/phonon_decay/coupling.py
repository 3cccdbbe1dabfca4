"""Force matrix elements ``F_ab = -<a|U'|b>`` and the dipole identity.

Forces are in internal units: ``U'`` in rad s^-1 m^-1, so ``hbar * F`` is a
force in newtons. A continuum leg carries an extra ``(rad/s)^(-1/2)`` from its
energy normalization.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from . import _numerov
from . import units as u
from .spectrum import BoundState, ContinuumState, Grid, SpectrumCatalog, continuum_state

_INTERP_ORDER = 6
TAIL_TOLERANCE = 1e-4


class CouplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Leg:
    """A state sampled on a grid: the common currency of the overlap routines."""

    grid: Grid
    values: np.ndarray
    energy: float
    label: object

    @property
    def x_last(self) -> float:
        return float(self.grid.x[len(self.values) - 1])


def bound_leg(catalog: SpectrumCatalog, nu: int) -> Leg:
    st = catalog.states[nu]
    return Leg(catalog.grid, st.wavefunction, st.energy, nu)


def continuum_leg(state: ContinuumState) -> Leg:
    return Leg(state.grid, state.wavefunction, state.energy, ("free", state.energy))


def _as_leg(state, catalog=None) -> Leg:
    if isinstance(state, Leg):
        return state
    if isinstance(state, ContinuumState):
        return continuum_leg(state)
    if isinstance(state, BoundState):
        if catalog is None:
            raise CouplingError("a bound state needs its catalog")
        return bound_leg(catalog, state.nu)
    if isinstance(state, (int, np.integer)):
        if catalog is None:
            raise CouplingError("a level index needs its catalog")
        return bound_leg(catalog, int(state))
    raise TypeError(f"cannot use {type(state).__name__} as a state")


def _same_grid(a: Grid, b: Grid) -> bool:
    return a is b or (a.size == b.size and np.array_equal(a.x, b.x))


def _on_base(base: Leg, other: Leg) -> np.ndarray:
    """Samples of ``other`` on the nodes of ``base`` (zero outside its support)."""
    n = min(len(base.values), base.grid.size)
    xb = base.grid.x[:n]
    if _same_grid(base.grid, other.grid):
        out = np.zeros(n)
        m = min(n, len(other.values))
        out[:m] = other.values[:m]
        return out
    xo = other.grid.x[: len(other.values)]
    out = np.zeros(n)
    inside = (xb >= xo[0]) & (xb <= xo[-1])
    if np.any(inside):
        out[inside] = _numerov.lagrange_interp(xo, other.values, xb[inside], _INTERP_ORDER)
    return out


def overlap(a: Leg, b: Leg, weight=None) -> float:
    """``integral a(x) * weight(x) * b(x) dx`` on the finer of the two grids."""
    if a.grid.x[0] != b.grid.x[0]:
        raise CouplingError("states live on grids with different inner walls")
    # the grid resolving the higher energy floor is finer; ties keep the longer support
    if (b.grid.e_floor, b.x_last) > (a.grid.e_floor, a.x_last):
        a, b = b, a
    vb = _on_base(a, b)
    n = len(vb)
    # integrate over the shorter support only
    last = min(a.x_last, b.x_last)
    n = min(n, int(np.searchsorted(a.grid.x[:n], last, side="right")))
    x = a.grid.x[:n]
    integrand = a.values[:n] * vb[:n]
    if weight is not None:
        integrand = integrand * weight(x)
    return a.grid.integrate(integrand)


def force_element(a, b, potential, catalog: SpectrumCatalog | None = None) -> float:
    """``F_ab = -integral phi_a U' phi_b dx`` (rad s^-1 m^-1 per leg normalization)."""
    la, lb = _as_leg(a, catalog), _as_leg(b, catalog)
    return -overlap(la, lb, potential.gradient)


def position_element(a, b, catalog: SpectrumCatalog | None = None) -> float:
    la, lb = _as_leg(a, catalog), _as_leg(b, catalog)
    return overlap(la, lb, lambda x: x)


def force_matrix(catalog: SpectrumCatalog) -> np.ndarray:
    """Dense symmetric bound-bound force matrix; cached on the catalog."""
    if catalog.force is not None and catalog.force.shape[0] == len(catalog):
        return catalog.force
    grid = catalog.grid
    n_max = max(s.support for s in catalog.states)
    phi = np.zeros((len(catalog), n_max))
    for i, st in enumerate(catalog.states):
        phi[i, : st.support] = st.wavefunction
    dens = grid.weights[:n_max] * catalog.potential.gradient(grid.x[:n_max])
    force = -(phi * dens) @ phi.T
    force = 0.5 * (force + force.T)
    catalog.force = force
    return force


def position_matrix(catalog: SpectrumCatalog) -> np.ndarray:
    grid = catalog.grid
    n_max = max(s.support for s in catalog.states)
    phi = np.zeros((len(catalog), n_max))
    for i, st in enumerate(catalog.states):
        phi[i, : st.support] = st.wavefunction
    xm = (phi * (grid.weights[:n_max] * grid.x[:n_max])) @ phi.T
    return 0.5 * (xm + xm.T)


def coupling_g(force: float, solid, volume: float) -> float:
    """``g = F / sqrt(2 M N hbar)`` for a solid sample of ``volume`` (m^3).

    ``force`` is internal (``hbar * force`` in newtons), so the result is in
    rad/s per sqrt(rad/s). Rates never need the volume: it cancels against
    the Debye mode density.
    """
    n_atoms = solid.number_density * volume
    return u.HBAR * force / math.sqrt(2.0 * solid.mass * n_atoms * u.HBAR)


def dipole_cross_check(catalog: SpectrumCatalog, a: int, b: int, floor: float = 0.0) -> float:
    """Relative gap between ``F_ab`` and ``-m w_ab^2 x_ab / hbar``."""
    f_quad = force_element(a, b, catalog.potential, catalog)
    x_quad = position_element(a, b, catalog)
    omega = catalog.states[a].energy - catalog.states[b].energy
    f_dip = -catalog.potential.mass * omega**2 * x_quad / u.HBAR
    scale = max(abs(f_quad), floor)
    if scale == 0.0:
        return abs(f_dip)
    return abs(f_quad - f_dip) / scale


class ContinuumBank:
    """Continuum states of one potential, cached, with their force elements.

    Parameters
    ----------
    catalog : SpectrumCatalog
        Bound levels; bound-free columns are computed against all of them.
    points_per_wavelength : int
        Resolution of every continuum grid.
    """

    base_reach = 16e-9
    # cached continuum grids are large at THz energies; cap total nodes held
    max_cached_nodes = 12_000_000

    def __init__(self, catalog: SpectrumCatalog, points_per_wavelength: int | None = None):
        self.catalog = catalog
        self.potential = catalog.potential
        self.ppw = points_per_wavelength or catalog.grid.points_per_wavelength
        self._states: OrderedDict[tuple[float, float], ContinuumState] = OrderedDict()
        self._columns: dict[float, np.ndarray] = {}
        self._pairs: dict[tuple[float, float], float] = {}
        self._phi = None
        params = getattr(self.potential, "params", None)
        self._c3 = params.c3 if params is not None else 0.0

    def state(self, energy: float, reach: float = 0.0) -> ContinuumState:
        """Continuum state at ``energy`` whose grid extends at least to ``reach``."""
        energy = float(energy)
        best = None
        for key, st in self._states.items():
            if key[0] == energy and st.grid.x[-1] >= reach:
                if best is None or st.grid.size < best[1].grid.size:
                    best = (key, st)
        if best is not None:
            self._states.move_to_end(best[0])
            return best[1]
        st = continuum_state(energy, self.potential, points_per_wavelength=self.ppw, reach=reach)
        # the solver coefficients are not needed once the state is built
        st.grid.w = st.grid.v = None
        held = sum(v.grid.size for v in self._states.values())
        while self._states and held + st.grid.size > self.max_cached_nodes:
            held -= self._states.popitem(last=False)[1].grid.size
        self._states[(energy, float(st.grid.x[-1]))] = st
        return st

    def _bound_matrix(self):
        if self._phi is None:
            cat = self.catalog
            n_max = max(s.support for s in cat.states)
            phi = np.zeros((len(cat), n_max))
            for i, st in enumerate(cat.states):
                phi[i, : st.support] = st.wavefunction
            self._phi = phi
        return self._phi

    def bound_column(self, energy: float) -> np.ndarray:
        """``F_{nu, E}`` for every bound level (energy-normalized continuum leg)."""
        key = float(energy)
        col = self._columns.get(key)
        if col is not None:
            return col
        phi = self._bound_matrix()
        xs = self.catalog.grid.x[: phi.shape[1]]
        cs = self.state(energy, reach=float(xs[-1]))
        n = int(np.searchsorted(cs.grid.x, xs[-1], side="right"))
        xt = cs.grid.x[:n]
        ct = -cs.grid.weights[:n] * self.potential.gradient(xt) * cs.wavefunction[:n]
        z = _numerov.lagrange_scatter(xs, xt, ct, _INTERP_ORDER)
        col = phi @ z
        self._columns[key] = col
        return col

    def pair(self, e1: float, e2: float, max_doublings: int = 6) -> float:
        """Free-free element ``F(E1, E2)`` with an ``x^-4`` tail guard.

        Past the integration end ``X`` the integrand is bounded by
        ``3 C3 A1 A2 / x^4``; the reach grows fourfold until the resulting bound
        ``C3 A1 A2 / X^3`` is below ``TAIL_TOLERANCE`` of the value.
        """
        key = (float(min(e1, e2)), float(max(e1, e2)))
        if key in self._pairs:
            return self._pairs[key]
        reach = self.base_reach
        for _ in range(max_doublings + 1):
            s1, s2 = self.state(key[0], reach), self.state(key[1], reach)
            value = force_element(s1, s2, self.potential)
            x_cut = min(s1.grid.x[-1], s2.grid.x[-1])
            tail = self._c3 * s1.amplitude * s2.amplitude / x_cut**3
            if tail <= TAIL_TOLERANCE * abs(value):
                self._pairs[key] = value
                return value
            reach = 4.0 * x_cut
        raise CouplingError(
            f"free-free element at {u.hz(e1):.4e}, {u.hz(e2):.4e} Hz not converged "
            f"(tail {tail:.3e} vs value {value:.3e})"
        )

    def pair_matrix(self, e_rows, e_cols) -> np.ndarray:
        return np.array([[self.pair(a, b) for b in e_cols] for a in e_rows])

    def clear(self):
        self._states.clear()
