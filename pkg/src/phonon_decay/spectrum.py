"""Bound and continuum eigenstates of the one-dimensional surface problem.

The Schrodinger equation ``-phi'' + k_factor * (U - E) * phi = 0`` is solved
on a mapped coordinate ``s`` with unit step, where ``dx/ds = p(x)`` follows
the local de Broglie wavelength. Writing ``phi = sqrt(p) * u`` removes the
first-derivative term and leaves ``u'' = -(W E - V) u`` on a uniform mesh, so
a single Numerov sweep covers the picometre-scale well and the micrometre
tail alike.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from . import _numerov
from . import units as u
from .potential import DomainError, Potential, PotentialParams, SurfacePotential

E_FLOOR = u.from_hz(1e6)
# e-folds of evanescent decay before the inward sweep starts
_DECAY_START = 40.0
# a level is kept if its tail has decayed by 1e-8 inside the grid
TAIL_DECAY = math.log(1e8)
_MAX_EXTENSIONS = 8


class SpectrumError(RuntimeError):
    """Numerical failure of the eigenvalue search."""


class DomainSizeError(DomainError):
    """The grid does not reach the region the calculation needs."""


@dataclass
class Grid:
    """Nodes ``x[i] = x(s = i)`` and the transformed-equation coefficients.

    Attributes
    ----------
    x : ndarray
        Node positions (m), strictly increasing, ``x[0]`` is the hard wall.
    p : ndarray
        Local step ``dx/ds`` (m).
    w, v : ndarray
        Coefficients of ``u'' = -(w * E - v) u``.
    weights : ndarray
        Trapezoid weights for ``integral f dx`` on the nodes.
    """

    x: np.ndarray
    p: np.ndarray
    w: np.ndarray
    v: np.ndarray
    weights: np.ndarray
    i_min: int
    e_floor: float
    points_per_wavelength: int

    @property
    def size(self) -> int:
        return self.x.shape[0]

    def integrate(self, values) -> float:
        return float(np.dot(self.weights[: len(values)], values))


def build_grid(potential: Potential, x_end: float, points_per_wavelength: int = 40,
               e_floor: float = E_FLOOR) -> Grid:
    """Map ``[x_wall, x_end]`` onto integer ``s`` with ``points_per_wavelength``
    nodes per local wavelength at energy ``e_floor`` above the potential.
    """
    x0 = potential.x_wall
    if not x_end > x0:
        raise DomainSizeError("outer boundary must lie beyond the inner wall")
    a = u.TWO_PI / points_per_wavelength
    terms = potential.density_terms(e_floor)
    if terms is not None:
        # sqrt(g) = sqrt(k_factor * terms), one step in s spans a / sqrt(k_factor) of that integral
        x = _numerov.map_nodes(x0, x_end, a / math.sqrt(potential.k_factor), *terms,
                               _numerov._GL_T, _numerov._GL_W)
    else:
        x = _ode_nodes(potential, x0, x_end, a, e_floor)

    g, dg, d2g = potential.grid_density(x, e_floor)
    p = a / np.sqrt(g)
    h_x = -0.5 * a * g**-1.5 * dg
    h_xx = a * (0.75 * g**-2.5 * dg**2 - 0.5 * g**-1.5 * d2g)
    schwarzian = p * h_xx - 0.5 * h_x**2
    c = potential.k_factor
    w = c * p**2
    v = w * potential(x) - 0.5 * schwarzian

    weights = p.copy()
    weights[0] *= 0.5
    weights[-1] *= 0.5
    i_min = int(np.searchsorted(x, potential.well_minimum()))
    return Grid(x, p, w, v, weights, min(i_min, len(x) - 2), e_floor, points_per_wavelength)


def _ode_nodes(potential, x0, x_end, a, e_floor):
    dens = potential.density_scalar
    length = solve_ivp(lambda x, s: [math.sqrt(dens(x, e_floor)) / a], (x0, x_end), [0.0],
                       method="DOP853", rtol=1e-10, atol=1e-12)
    n = int(math.ceil(length.y[0, -1]))
    sol = solve_ivp(lambda s, x: [a / math.sqrt(dens(x[0], e_floor))], (0.0, float(n)), [x0],
                    method="DOP853", rtol=1e-13, atol=1e-30, t_eval=np.arange(n + 1, dtype=float))
    if not sol.success:
        raise SpectrumError(f"grid mapping failed: {sol.message}")
    x = sol.y[0]
    x[0] = x0
    return x


@dataclass
class BoundState:
    nu: int
    energy: float
    wavefunction: np.ndarray = field(repr=False)
    tail_decay: float = math.inf

    @property
    def support(self) -> int:
        """Number of leading grid nodes carrying the state (zero beyond)."""
        return self.wavefunction.shape[0]


@dataclass
class ContinuumState:
    """Energy-normalized scattering state on its own grid.

    Normalized so that ``phi -> amplitude * sin(k x + phase)`` far from the
    surface with ``amplitude = sqrt(2 m / (pi hbar k))``; this is unit
    normalization per internal energy unit (rad/s).
    """

    energy: float
    k: float
    phase: float
    amplitude: float
    grid: Grid = field(repr=False)
    wavefunction: np.ndarray = field(repr=False)


@dataclass
class SpectrumCatalog:
    """Bound levels of one potential on one shared grid."""

    potential: Potential = field(repr=False)
    grid: Grid = field(repr=False)
    states: list[BoundState] = field(repr=False)
    config_hash: str = ""
    x_outer: float = 0.0
    force: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.states)

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.states])

    def dense(self, nu: int) -> np.ndarray:
        """Wavefunction of level ``nu`` padded to the full grid."""
        out = np.zeros(self.grid.size)
        phi = self.states[nu].wavefunction
        out[: len(phi)] = phi
        return out

    def crossings(self) -> np.ndarray:
        return np.array([self.potential.rightmost_crossing(s.energy) for s in self.states])


# ---------------------------------------------------------------- bound states


def _count(grid: Grid, energy: float) -> int:
    return _numerov.count_nodes(energy, grid.w, grid.v, grid.i_min, _DECAY_START)


def _bracket(grid: Grid, nu: int, lo: float, hi: float, rel: float):
    """Shrink ``[lo, hi]`` until it holds only eigenvalue ``nu``."""
    while hi - lo > rel * max(abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if _count(grid, mid) > nu:
            hi = mid
        else:
            lo = mid
    return lo, hi


def _eigenvalue(grid: Grid, nu: int, lo: float, hi: float) -> float:
    lo, hi = _bracket(grid, nu, lo, hi, 1e-7)
    if _count(grid, lo) != nu or _count(grid, hi) != nu + 1:
        raise SpectrumError(
            f"node count not monotone near level {nu} "
            f"(window {u.hz(lo):.6e}..{u.hz(hi):.6e} Hz); the grid is too coarse"
        )
    m, i_end, _ = _numerov.turning_and_end(0.5 * (lo + hi), grid.w, grid.v, grid.i_min, _DECAY_START)

    def f(e):
        return _numerov.mismatch(e, grid.w, grid.v, m, i_end)

    f_lo, f_hi = f(lo), f(hi)
    if np.isfinite(f_lo) and np.isfinite(f_hi) and f_lo * f_hi < 0:
        return brentq(f, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=200)
    # pole inside the bracket: finish by node counting
    while hi - lo > 1e-10 * abs(lo) and hi - lo > u.TWO_PI:
        mid = 0.5 * (lo + hi)
        if _count(grid, mid) > nu:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _bound_wavefunction(grid: Grid, energy: float):
    m, i_end, acc = _numerov.turning_and_end(energy, grid.w, grid.v, grid.i_min, _DECAY_START)
    uo = _numerov.outward(energy, grid.w, grid.v, m + 1)
    if i_end > m + 1:
        ui = _numerov.inward(energy, grid.w, grid.v, i_end, m)
        vals = np.concatenate([uo[: m + 1], ui[m + 1 : i_end + 1] * (uo[m] / ui[m])])
    else:
        vals = uo[: i_end + 1]
    phi = np.sqrt(grid.p[: len(vals)]) * vals
    norm = math.sqrt(grid.integrate(phi**2))
    phi /= norm
    if phi[1] < 0:
        phi = -phi
    return phi, acc


def sign_changes(values) -> int:
    s = np.sign(values)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _solve_on_grid(potential: Potential, grid: Grid):
    threshold = potential.threshold()
    e_top = threshold - 1e-12 * max(1.0, abs(threshold))
    u_min = float(np.min(potential(grid.x[1:-1])))
    n_levels = _count(grid, e_top)
    states = []
    lo = u_min
    for nu in range(n_levels):
        # the next level's lower bracket is the previous eigenvalue
        energy = _eigenvalue(grid, nu, lo, e_top)
        phi, acc = _bound_wavefunction(grid, energy)
        nodes = sign_changes(phi)
        if nodes != nu:
            raise SpectrumError(f"level {nu} has {nodes} nodes at {u.hz(energy):.6e} Hz")
        states.append(BoundState(nu, energy, phi, acc))
        lo = energy
    return states


def solve_bound_levels(potential: Potential, x_end: float, points_per_wavelength: int = 40,
                       e_floor: float = E_FLOOR):
    """All levels below the threshold in ``[x_wall, x_end]`` with a hard wall at both ends.

    Returns ``(grid, states)``; ``state.tail_decay`` records how many
    e-folds the tail decayed inside the grid (capped at the inward start).
    """
    grid = build_grid(potential, x_end, points_per_wavelength, e_floor)
    return grid, _solve_on_grid(potential, grid)


def solve_bound_spectrum(config, potential: Potential | None = None) -> SpectrumCatalog:
    """Bound spectrum for ``config``.

    Levels whose evanescent tail has not decayed by ``1e-8`` inside the outer
    boundary are box artefacts and are dropped. The boundary grows by a
    factor 1.5 until level ``config.target_level`` (when set) is retained.
    """
    if potential is None:
        potential = SurfacePotential(config.potential, config.inner_wall)
    x_out = config.x_outer
    target = config.target_level
    previous = -1
    for _ in range(_MAX_EXTENSIONS):
        grid, states = solve_bound_levels(potential, x_out, config.step_points_per_wavelength)
        kept = [s for s in states if s.tail_decay >= TAIL_DECAY]
        if target is None or len(kept) > target:
            return SpectrumCatalog(potential, grid, kept, config.spectrum_hash(), x_out)
        if len(kept) == previous:
            break
        previous = len(kept)
        x_out *= 1.5
    raise SpectrumError(
        f"level {target} not resolved: {len(kept)} levels converged within x_out = {x_out:.3e} m"
    )


# ------------------------------------------------------------ continuum states


def continuum_state(energy: float, potential: Potential, *, points_per_wavelength: int = 40,
                    x_end: float | None = None, reach: float = 0.0, window: float = 1e-3,
                    n_wavelengths: int = 6) -> ContinuumState:
    """Energy-normalized continuum state at ``energy`` (rad/s) above threshold.

    The outward solution is fitted over ``[x_match, x_match + n_wavelengths
    * lambda]`` with ``|U(x_match)| = window * energy`` to WKB sine and cosine
    waves, which fixes the normalization. Passing ``x_end`` smaller than that
    window raises :class:`DomainSizeError`; a larger ``x_end`` extends the
    state so that matrix elements can be integrated further out. ``reach``
    extends the grid to at least that position without the window check.
    """
    if not energy > 0:
        raise DomainError("continuum energy must be positive")
    c = potential.k_factor
    k = math.sqrt(c * energy)
    lam = u.TWO_PI / k
    x_match = potential.asymptotic_start(window * energy)
    x_fit_end = x_match + n_wavelengths * lam
    if x_end is not None and x_end < x_fit_end:
        raise DomainSizeError(
            f"x_end = {x_end:.3e} m misses the asymptotic window ending at {x_fit_end:.3e} m"
        )
    x_end = max(x_end or 0.0, x_fit_end, reach)

    grid = build_grid(potential, x_end, points_per_wavelength, max(energy, E_FLOOR))
    uu = _numerov.outward(energy, grid.w, grid.v, grid.size - 1)
    phi = np.sqrt(grid.p) * uu

    sel = (grid.x >= x_match) & (grid.x <= x_fit_end)
    xs = grid.x[sel]
    k_loc = np.sqrt(c * (energy - potential(xs)))
    theta = np.concatenate([[0.0], np.cumsum(0.5 * (k_loc[1:] + k_loc[:-1]) * np.diff(xs))])
    basis = np.column_stack([np.sin(theta), np.cos(theta)]) / np.sqrt(k_loc)[:, None]
    (ca, cb), *_ = np.linalg.lstsq(basis, phi[sel], rcond=None)
    big = math.hypot(ca, cb)
    target = math.sqrt(2.0 * potential.mass / (math.pi * u.HBAR))
    phi *= target / big
    # phi ~ sin(theta + delta_fit); the WKB phase still gains
    # integral (k_loc - k) dx beyond the window end
    delta_fit = math.atan2(cb, ca)
    def excess(x):
        du = -c * float(potential(x))
        return du / (math.sqrt(c * energy + du) + k)

    # x = x_end / t maps the power-law tail onto a smooth integrand on (0, 1]
    x_last = float(xs[-1])
    tail, _ = quad(lambda t: excess(x_last / t) * x_last / t**2 if t > 0 else 0.0, 0.0, 1.0)
    phase = theta[-1] + delta_fit - k * xs[-1] + tail
    phase = (phase + math.pi) % u.TWO_PI - math.pi
    return ContinuumState(energy, k, phase, target / math.sqrt(k), grid, phi)


def box_scale(energy: float, box_length: float, mass: float) -> float:
    """``(dE/dn)^(-1/2) = sqrt(L / (pi v))`` for a box of length ``L``.

    A unit-normalized box state equals the energy-normalized state (per
    rad/s) divided by this factor, so box rates are ``pi v / L`` times the
    rate densities.
    """
    if not (energy > 0 and box_length > 0 and mass > 0):
        raise DomainError("box_scale needs positive energy, length and mass")
    return math.sqrt(box_length / (math.pi * velocity(energy, mass)))


def velocity(energy: float, mass: float) -> float:
    """Speed of a free atom with kinetic energy ``energy`` (rad/s)."""
    return math.sqrt(2.0 * u.HBAR * energy / mass)


# ------------------------------------------------------------------ persistence

MAGIC = b"PHDCAT01"
FORMAT_VERSION = 1


def save_catalog(catalog: SpectrumCatalog, path) -> Path:
    """Binary catalog plus a ``.json`` sidecar index next to it."""
    path = Path(path)
    pot = catalog.potential
    if not isinstance(pot, SurfacePotential):
        raise TypeError("only surface-potential catalogs are persisted")
    grid = catalog.grid
    prm = pot.params
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(catalog.config_hash.encode().ljust(16, b"\0")[:16])
        fh.write(struct.pack("<7d", prm.c3, prm.a_repulsion, prm.alpha, prm.mass,
                             pot.x_wall, grid.e_floor, catalog.x_outer))
        fh.write(struct.pack("<qqq", grid.points_per_wavelength, grid.i_min, grid.size))
        for arr in (grid.x, grid.p, grid.w, grid.v, grid.weights):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        fh.write(struct.pack("<q", len(catalog.states)))
        for st in catalog.states:
            fh.write(struct.pack("<qddq", st.nu, st.energy, st.tail_decay, st.support))
            fh.write(np.ascontiguousarray(st.wavefunction, dtype="<f8").tobytes())
        force = catalog.force
        if force is None:
            fh.write(struct.pack("<q", 0))
        else:
            fh.write(struct.pack("<q", force.shape[0]))
            fh.write(np.ascontiguousarray(force, dtype="<f8").tobytes())
    sidecar_path(path).write_text(json.dumps(sidecar(catalog), indent=1) + "\n")
    return path


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def sidecar(catalog: SpectrumCatalog) -> dict:
    crossings = catalog.crossings()
    return {
        "format": MAGIC.decode(),
        "config_hash": catalog.config_hash,
        "x_outer_m": catalog.x_outer,
        "grid_nodes": catalog.grid.size,
        "levels": [
            {"nu": s.nu, "energy_hz": u.hz(s.energy), "x_cross_nm": xc * 1e9}
            for s, xc in zip(catalog.states, crossings)
        ],
    }


def load_catalog(path) -> SpectrumCatalog:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a spectrum catalog")
    pos = 8

    def take(fmt):
        nonlocal pos
        vals = struct.unpack_from(fmt, data, pos)
        pos += struct.calcsize(fmt)
        return vals

    def array(n):
        nonlocal pos
        arr = np.frombuffer(data, dtype="<f8", count=n, offset=pos).astype(float)
        pos += 8 * n
        return arr

    (version,) = take("<I")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported catalog version {version}")
    chash = data[pos : pos + 16].rstrip(b"\0").decode()
    pos += 16
    c3, a_rep, alpha, mass, x_wall, e_floor, x_outer = take("<7d")
    ppw, i_min, n = take("<qqq")
    x, p, w, v, weights = (array(n) for _ in range(5))
    potential = SurfacePotential(PotentialParams(c3, a_rep, alpha, mass), inner_wall=x_wall)
    grid = Grid(x, p, w, v, weights, int(i_min), e_floor, int(ppw))
    (count,) = take("<q")
    states = []
    for _ in range(count):
        nu, energy, decay, support = take("<qddq")
        states.append(BoundState(int(nu), energy, array(support), decay))
    (nf,) = take("<q")
    force = array(nf * nf).reshape(nf, nf) if nf else None
    return SpectrumCatalog(potential, grid, states, chash, x_outer, force)
