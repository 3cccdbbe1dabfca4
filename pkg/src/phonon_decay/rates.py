"""Phonon-mediated transition and decay rates in the Debye model.

Conventions
-----------
Energies and transition frequencies are internal angular frequencies (rad/s)
and forces are internal (``hbar * F`` in newtons). A transition of frequency
``w`` with force element ``F`` then has

    R_e = K (n(w) + 1) w F^2,    R_a = K n(w) w F^2,    K = 3 pi hbar / (M w_D^3),

for ``w <= w_D`` and zero beyond the Debye cutoff. With an energy-normalized
continuum leg the same expression is a rate density per rad/s of continuum
energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import roots_laguerre, roots_legendre

from . import units as u
from .coupling import ContinuumBank, force_matrix
from .spectrum import SpectrumCatalog, velocity

# Laguerre nodes whose weight is below this fraction of the total are dropped
LAGUERRE_CUTOFF = 1e-16
_MIN_SPLINE = 6


class OrderingError(ValueError):
    """A rate was requested for a pair that is not ordered upper > lower."""


# ------------------------------------------------------------------ basics


def mean_phonon_number(omega, temperature):
    """Bose-Einstein occupation ``1 / (exp(hbar w / k T) - 1)``; zero at ``T = 0``."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("phonon frequency must be positive")
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if temperature == 0:
        out = np.zeros_like(omega)
    else:
        with np.errstate(over="ignore"):
            out = 1.0 / np.expm1(u.HBAR * omega / (u.K_B * temperature))
    return out if out.ndim else float(out)


def _nbar_omega(omega, temperature):
    """``n(w) * w`` with its finite ``w -> 0`` limit ``k T / hbar``."""
    omega = np.asarray(omega, dtype=float)
    if temperature == 0:
        return np.zeros_like(omega)
    theta = u.K_B * temperature / u.HBAR
    x = omega / theta
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        val = np.where(x > 1e-8, omega / np.expm1(np.maximum(x, 1e-300)), theta * (1.0 - 0.5 * x))
    return val


def rate_prefactor(solid) -> float:
    """``3 pi hbar / (M w_D^3)`` in units that take internal ``w`` and ``F``."""
    return 3.0 * math.pi * u.HBAR / (solid.mass * solid.omega_debye**3)


def rate_function(omega, force, solid):
    """Rate for a transition releasing ``omega`` into the bath.

    Positive ``omega`` is emission (``n + 1``), negative absorption (``n``);
    zero beyond the Debye cutoff. Vectorized over ``omega`` and ``force``.
    """
    omega = np.asarray(omega, dtype=float)
    w = np.abs(omega)
    k = rate_prefactor(solid)
    occ = _nbar_omega(w, solid.temperature) + np.where(omega > 0, w, 0.0)
    out = np.where(w <= solid.omega_debye, k * occ * np.asarray(force, dtype=float) ** 2, 0.0)
    return out if out.ndim else float(out)


def transition_rates(omega, force, solid):
    """``(R_e, R_a)`` for an upper-lower gap ``omega > 0``; zero past ``w_D``."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise OrderingError("transition frequency must be positive (upper level first)")
    return rate_function(omega, force, solid), rate_function(-omega, force, solid)


def emission_rate(catalog: SpectrumCatalog, l: int, k: int, solid) -> float:
    """Downward rate ``l -> k`` (``E_l > E_k``)."""
    return _pair_rates(catalog, l, k, solid)[0]


def absorption_rate(catalog: SpectrumCatalog, l: int, k: int, solid) -> float:
    """Upward rate ``k -> l`` (``E_l > E_k``)."""
    return _pair_rates(catalog, l, k, solid)[1]


def _pair_rates(catalog, l, k, solid):
    e = catalog.energies
    if not e[l] > e[k]:
        raise OrderingError(f"level {l} is not above level {k}")
    force = force_matrix(catalog)[l, k]
    re, ra = transition_rates(e[l] - e[k], force, solid)
    return float(re), float(ra)


@dataclass
class RateSet:
    """Bound-bound rates.

    ``emission[k, l]`` is the rate ``l -> k`` for ``k < l`` and
    ``absorption[l, k]`` the rate ``k -> l``; both vanish elsewhere.
    """

    energies: np.ndarray
    emission: np.ndarray
    absorption: np.ndarray

    @property
    def total(self) -> np.ndarray:
        """``total[j, i]``: rate ``i -> j`` for any pair."""
        return self.emission + self.absorption


def rate_matrices(catalog: SpectrumCatalog, solid) -> RateSet:
    e = catalog.energies
    force = force_matrix(catalog)
    omega = e[None, :] - e[:, None]  # [j, i] = E_i - E_j, released when i -> j
    rates = rate_function(np.where(omega == 0, 1.0, omega), force, solid)
    np.fill_diagonal(rates, 0.0)
    emission = np.triu(rates, 1)
    absorption = np.tril(rates, -1)
    return RateSet(e, emission, absorption)


# --------------------------------------------------------------- the oracle


def mode_sum_rate(omega: float, force: float, solid, width: float | None = None,
                  samples_per_width: int = 64):
    """Golden-rule mode sum over the Debye sphere with a triangular delta.

    Sums ``2 pi |g_q|^2 (n_q + [1]) Lambda(w_q - w)`` over a uniform mesh of
    phonon frequencies with the Debye density ``3 N w_q^2 / w_D^3`` and
    ``|g_q|^2 = hbar F^2 / (2 M N w_q)``; ``N`` cancels. ``Lambda`` is a unit
    triangle of half-width ``width`` (default ``w_D / 1e4``).

    Returns ``(R_e, R_a)``.
    """
    if width is None:
        width = solid.omega_debye * 1e-4
    if not omega > 0:
        raise OrderingError("transition frequency must be positive")
    if width >= omega:
        raise ValueError("kernel wider than the transition frequency")
    wd = solid.omega_debye
    lo, hi = omega - width, min(omega + width, wd)
    if lo >= wd:
        return 0.0, 0.0
    step = width / samples_per_width
    nodes = np.arange(math.floor(lo / step), math.ceil(hi / step) + 1) * step
    nodes = nodes[(nodes > 0) & (nodes <= wd)]
    kernel = np.clip(1.0 - np.abs(nodes - omega) / width, 0.0, None) / width
    density = 3.0 * nodes**2 / wd**3  # per particle
    g2 = u.HBAR * force**2 / (2.0 * solid.mass * nodes)  # times N
    n = mean_phonon_number(nodes, solid.temperature) if solid.temperature > 0 else np.zeros_like(nodes)
    base = 2.0 * math.pi * density * g2 * kernel * step
    return float(np.sum(base * (n + 1.0))), float(np.sum(base * n))


# ---------------------------------------------------------------- quadrature


def _gauss(lo: float, hi: float, n: int):
    t, w = roots_legendre(n)
    return 0.5 * (hi - lo) * t + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


def log_quadrature(lo: float, hi: float, n: int, floor: float):
    """Nodes/weights for ``integral_lo^hi f(E) dE`` using Gauss-Legendre in
    ``log E`` above ``floor`` and a short linear panel below it."""
    if hi <= lo:
        return np.zeros(0), np.zeros(0)
    if lo >= floor:
        y, wy = _gauss(math.log(lo), math.log(hi), n)
        e = np.exp(y)
        return e, wy * e
    if hi <= floor:
        return _gauss(lo, hi, max(4, n // 8))
    e1, w1 = _gauss(lo, floor, max(4, n // 8))
    y, wy = _gauss(math.log(floor), math.log(hi), n)
    return np.concatenate([e1, np.exp(y)]), np.concatenate([w1, wy * np.exp(y)])


def laguerre_rule(temperature: float, order: int = 48):
    """Energies and weights for ``integral_0^inf exp(-E / kT) f(E) dE``.

    Nodes carrying less than ``LAGUERRE_CUTOFF`` of the total weight are
    dropped: they change any polynomially bounded integrand by less than
    double precision but would need continuum states far above the Debye range.
    """
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    t, w = roots_laguerre(order)
    keep = w > LAGUERRE_CUTOFF * w.sum()
    theta = u.K_B * temperature / u.HBAR
    return t[keep] * theta, w[keep] * theta


def thermal_distribution(energy, temperature):
    """One-dimensional Maxwell-Boltzmann density of kinetic energy.

    ``P(E) = exp(-E / kT0) / sqrt(pi kT0 E)`` per unit internal energy.
    """
    energy = np.asarray(energy, dtype=float)
    if np.any(energy <= 0):
        raise ValueError("kinetic energy must be positive")
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    theta = u.K_B * temperature / u.HBAR
    out = np.exp(-energy / theta) / np.sqrt(math.pi * theta * energy)
    return out if out.ndim else float(out)


def thermal_wavelength(temperature: float, mass: float) -> float:
    return math.sqrt(2.0 * math.pi * u.HBAR**2 / (mass * u.K_B * temperature))


# ------------------------------------------------------------------ depletion


@dataclass
class Depletion:
    """Per-level depletion rates (1/s) and their bound/free split."""

    energies: np.ndarray
    gamma_e: np.ndarray
    gamma_a_bound: np.ndarray
    gamma_a_free: np.ndarray

    @property
    def gamma_a(self) -> np.ndarray:
        return self.gamma_a_bound + self.gamma_a_free

    @property
    def gamma(self) -> np.ndarray:
        return self.gamma_e + self.gamma_a


def desorption_rates(catalog: SpectrumCatalog, solid, bank: ContinuumBank | None = None,
                     mesh: int = 64, nodes: int = 96, e_low: float = u.from_hz(1e3)):
    """Bound-to-free absorption rate of every level.

    ``integral_0^{E_k + w_D} K n(w) w F_k(E)^2 dE`` with ``w = E - E_k``. The
    force column ``F_k(E)`` is computed on ``mesh`` log-spaced energies and
    interpolated by a cubic spline in ``log E``; levels deeper than ``w_D``
    get exactly zero.
    """
    bank = bank or ContinuumBank(catalog)
    e = catalog.energies
    wd = solid.omega_debye
    out = np.zeros(len(e))
    reach = wd + e.max()
    if reach <= 0:
        return out
    grid_e = np.geomspace(e_low, reach, mesh)
    cols = np.array([bank.bound_column(x) for x in grid_e])  # [energy, level]
    spline = CubicSpline(np.log(grid_e), cols, axis=0)
    k = rate_prefactor(solid)
    for i, ek in enumerate(e):
        top = ek + wd
        if top <= 0:
            continue
        en, we = log_quadrature(0.0, top, nodes, min(e_low, 0.5 * top))
        f = spline(np.log(np.maximum(en, e_low)))[:, i]
        out[i] = k * np.sum(we * _nbar_omega(en - ek, solid.temperature) * f**2)
    return out


def depletion_rates(catalog: SpectrumCatalog, solid, bank: ContinuumBank | None = None,
                    include_free: bool = True, **quadrature) -> Depletion:
    """``Gamma^e_kk = sum_{mu<k} R^e`` and ``Gamma^a_kk`` split into bound and free parts."""
    rs = rate_matrices(catalog, solid)
    gamma_e = rs.emission.sum(axis=0)
    gamma_a_bound = rs.absorption.sum(axis=0)
    if include_free:
        free = desorption_rates(catalog, solid, bank, **quadrature)
    else:
        free = np.zeros(len(catalog))
    return Depletion(rs.energies, gamma_e, gamma_a_bound, free)


def coherence_rate(depletion: Depletion, l: int, k: int):
    """``(Gamma_lk, Gamma^e_lk, Gamma^a_lk)`` as half-sums of the level rates."""
    ge = 0.5 * (depletion.gamma_e[l] + depletion.gamma_e[k])
    ga = 0.5 * (depletion.gamma_a[l] + depletion.gamma_a[k])
    return ge + ga, ge, ga


def coherence_rate_direct(rates: RateSet, l: int, k: int, free=(0.0, 0.0)) -> float:
    """Explicit ``mu`` sum ``(sum_mu R_{mu l} + sum_mu R_{mu k}) / 2`` plus
    the free-state parts ``free = (free_l, free_k)``."""
    total = rates.total
    return 0.5 * (sum(total[mu, l] for mu in range(total.shape[0]))
                  + sum(total[mu, k] for mu in range(total.shape[0]))
                  + free[0] + free[1])


# ----------------------------------------------------------------- adsorption


def _free_to_bound_density(bank: ContinuumBank, energy: float, solid) -> np.ndarray:
    """``R_{nu f}`` per rad/s for every bound level (emission into the bath)."""
    e = bank.catalog.energies
    col = bank.bound_column(energy)
    return rate_function(energy - e, col, solid)


def adsorption_rates(energy: float, bank: ContinuumBank, solid, box_length: float):
    """``(G_nu_f, G_f)`` for a free atom of kinetic energy ``energy`` in a box.

    ``G_nu_f = (pi v_f / L) R_nu_f`` with the density per rad/s; only bound
    final levels are included.
    """
    if not energy > 0:
        raise ValueError("free-state energy must be positive")
    v = velocity(energy, bank.potential.mass)
    g = math.pi * v / box_length * _free_to_bound_density(bank, energy, solid)
    return g, float(g.sum())


def ensemble_adsorption(energy: float, bank: ContinuumBank, solid, density: float, area: float):
    """``D_nu_f = 2 pi N_f R_nu_f`` with incidence flux ``N_f = rho0 S0 v_f / 2``."""
    v = velocity(energy, bank.potential.mass)
    flux = density * area * v / 2.0
    return 2.0 * math.pi * flux * _free_to_bound_density(bank, energy, solid)


def thermal_adsorption(temperature: float, bank: ContinuumBank, solid, box_length: float,
                       order: int = 48):
    """``(G_nu_T0, G_T0)``: adsorption averaged over a 1D thermal gas at ``temperature``."""
    en, we = laguerre_rule(temperature, order)
    lam = thermal_wavelength(temperature, bank.potential.mass)
    acc = np.zeros(len(bank.catalog))
    for e, w in zip(en, we):
        acc += w * _free_to_bound_density(bank, e, solid)
    g = lam / box_length * acc
    return g, float(g.sum())


# ------------------------------------------------------------------ free-free


@dataclass
class FreeFree:
    """Free-to-free rate densities (per rad/s of final energy) and totals (1/s)."""

    energy: float
    final_down: np.ndarray
    density_down: np.ndarray
    final_up: np.ndarray
    density_up: np.ndarray
    q_e: float
    q_a: float


def free_free_rates(energy: float, bank: ContinuumBank, solid, box_length: float,
                    nodes: int = 64) -> FreeFree:
    """Cooling (``E' < E``) and heating (``E' > E``) rates of a free atom.

    Final energies are Gauss-Legendre nodes: linear on ``(0, E)`` for
    emission, logarithmic in the gap on ``(E, E + w_D)`` for absorption.
    """
    if not energy > 0:
        raise ValueError("free-state energy must be positive")
    wd = solid.omega_debye
    pref = math.pi * velocity(energy, bank.potential.mass) / box_length
    lo_d = max(0.0, energy - wd)
    down, w_down = _gauss(lo_d, energy, max(8, nodes // 2))
    f_down = np.array([bank.pair(energy, x) for x in down])
    dens_down = pref * rate_function(energy - down, f_down, solid)
    gaps, w_up = log_quadrature(0.0, wd, nodes, min(energy, 1e-6 * wd))
    up = energy + gaps
    f_up = np.array([bank.pair(energy, x) for x in up])
    dens_up = pref * rate_function(-gaps, f_up, solid)
    return FreeFree(energy, down, dens_down, up, dens_up,
                    float(np.dot(w_down, dens_down)), float(np.dot(w_up, dens_up)))


@dataclass
class ThermalFreeFree:
    temperature: float
    q_e: float
    q_a: float


def thermal_free_free(temperature: float, bank: ContinuumBank, solid, box_length: float,
                      order: int = 48, gap_nodes: int = 64, mesh: int | None = None) -> ThermalFreeFree:
    """Thermal heating and cooling rates on one shared ``(a, w)`` rule.

    Every transition connects a lower energy ``a`` and an upper energy
    ``a + w`` with ``0 < w <= w_D``. The rule uses Laguerre nodes in ``a``
    (weight ``exp(-a / kT0)``) and logarithmic Gauss nodes in ``w``; both
    totals are evaluated on it, so at ``T0 = T`` they agree identically.
    With ``mesh`` the force elements come from a spline over that many
    upper energies instead of one continuum state per node.
    """
    wd = solid.omega_debye
    theta0 = u.K_B * temperature / u.HBAR
    a_nodes, a_w = laguerre_rule(temperature, order)
    gaps, g_w = log_quadrature(0.0, wd, gap_nodes, min(a_nodes.min(), 1e-6 * wd))
    f2 = _pair_table(bank, a_nodes, gaps, mesh) ** 2

    k = rate_prefactor(solid)
    nw = _nbar_omega(gaps, solid.temperature)
    up = k * nw[None, :] * f2
    # the upper state of a cooling transition carries the extra exp(-w / kT0)
    down = k * (nw + gaps)[None, :] * np.exp(-gaps / theta0)[None, :] * f2
    # (pi v / L) P(E) dE = (lambda_D / L) exp(-E / kT0) dE
    scale = thermal_wavelength(temperature, bank.potential.mass) / box_length
    return ThermalFreeFree(temperature, scale * float(a_w @ down @ g_w),
                           scale * float(a_w @ up @ g_w))


def thermal_free_free_density(final: float, temperature: float, bank: ContinuumBank, solid,
                              box_length: float, nodes: int = 48):
    """``(Q^e_{f'T0}, Q^a_{f'T0})`` per rad/s at final energy ``final``.

    Heating integrates initial energies over ``(max(0, E' - w_D), E')``,
    cooling over ``(E', E' + w_D)``; both against ``exp(-E / kT0)``.
    """
    theta0 = u.K_B * temperature / u.HBAR
    wd = solid.omega_debye
    scale = thermal_wavelength(temperature, bank.potential.mass) / box_length
    span = min(wd, 40.0 * theta0)
    lo = max(0.0, final - wd, final - span)
    a, wa = _gauss(lo, final, nodes)
    fa = np.array([bank.pair(x, final) for x in a])
    q_a = scale * float(np.sum(wa * np.exp(-a / theta0) * rate_function(a - final, fa, solid)))
    t, wt = _gauss(0.0, span, nodes)
    fe = np.array([bank.pair(final, final + x) for x in t])
    q_e = scale * float(np.sum(wt * np.exp(-(final + t) / theta0) * rate_function(t, fe, solid)))
    return q_e, q_a


def _pair_table(bank: ContinuumBank, a_nodes, gaps, mesh):
    """``F(a_i, a_i + w_j)``; direct or spline-interpolated over upper energies.

    The spline for one ``a`` uses the shared mesh points that fall inside its
    window ``(a + w_min, a + w_max)`` plus the two window ends. Where fewer
    than ``_MIN_SPLINE`` mesh points fall inside, the row is computed directly.
    Pairs outside the window are never evaluated: they carry no rate and
    their elements converge slowly.
    """
    if mesh is None:
        return np.array([[bank.pair(a, a + w) for w in gaps] for a in a_nodes])
    g_lo, g_hi = float(gaps.min()), float(gaps.max())
    uppers = np.geomspace(a_nodes.min() + g_lo, a_nodes.max() + g_hi, mesh)
    inside = [uppers[(uppers > a + g_lo) & (uppers < a + g_hi)] for a in a_nodes]
    # upper energies outermost so each heavy state is built once
    values: dict[tuple[int, float], float] = {}
    for b in uppers:
        for i, a in enumerate(a_nodes):
            if len(inside[i]) >= _MIN_SPLINE and a + g_lo < b < a + g_hi:
                values[(i, b)] = bank.pair(a, b)
    table = np.empty((len(a_nodes), len(gaps)))
    for i, a in enumerate(a_nodes):
        if len(inside[i]) < _MIN_SPLINE:
            table[i] = [bank.pair(a, a + w) for w in gaps]
            continue
        ends = (a + g_lo, a + g_hi)
        xs = np.concatenate([[ends[0]], inside[i], [ends[1]]])
        ys = np.concatenate([[bank.pair(a, ends[0])], [values[(i, b)] for b in inside[i]],
                             [bank.pair(a, ends[1])]])
        table[i] = CubicSpline(np.log(xs), ys)(np.log(a + gaps))
    return table
