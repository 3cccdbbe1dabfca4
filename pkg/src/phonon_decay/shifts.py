"""Phonon-induced frequency shifts of translational coherences.

The shift of the coherence between levels ``l`` and ``k`` splits into a
zero-temperature part

    D0 = (3 hbar / 2 M w_D^3) sum_mu integral_0^w_D
         [F_lmu^2 / (w_lmu - w) + F_muk^2 / (w_muk + w)] w dw

and a thermal part

    DT = (3 hbar / M w_D^3) sum_mu integral_0^w_D
         [w_lmu F_lmu^2 / (w_lmu^2 - w^2) + w_muk F_muk^2 / (w_muk^2 - w^2)] n(w) w dw

with internal forces and frequencies. Both reduce to two one-dimensional
principal-value integrals,

    J0(a) = PV integral_0^w_D w / (a - w) dw
    JT(a) = PV integral_0^w_D n(w) w / (a - w) dw,

through ``D0 = c/2 sum [F_lmu^2 J0(w_lmu) - F_muk^2 J0(w_kmu)]`` and
``DT = c sum [F_lmu^2 S(w_lmu) + F_muk^2 S(w_muk)]`` where
``S(a) = (JT(a) - JT(-a)) / 2`` is odd and ``c = 3 hbar / (M w_D^3)``.
Setting ``l = k`` cancels every term, so the diagonal shift is exactly zero.

Principal values use symmetric excision: the window ``[p - r, p + r]``
around the pole ``p`` is folded onto ``u in (0, r]`` where the odd part of
the integrand cancels, leaving the regular integrand
``(f(p - u) - f(p + u)) / u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import units as u
from .coupling import ContinuumBank, force_matrix
from .rates import _nbar_omega, log_quadrature
from .spectrum import SpectrumCatalog

PV_TOLERANCE = 1e-6
_QUAD_RTOL = 1e-12
_QUAD_LIMIT = 400


class ShiftError(RuntimeError):
    pass


@dataclass(frozen=True)
class PrincipalValue:
    value: float
    # relative change when the excision window is halved
    refinement: float


def principal_value(f, pole: float, lo: float, hi: float, check: bool = True) -> PrincipalValue:
    """``PV integral_lo^hi f(w) / (pole - w) dw`` by symmetric excision.

    Parameters
    ----------
    f : callable
        Smooth scalar numerator.
    pole, lo, hi : float
        Pole position and integration limits.
    check : bool
        Repeat with half the excision window and raise :class:`ShiftError`
        when the two results differ by more than ``PV_TOLERANCE``.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    if not lo < pole < hi:
        if pole in (lo, hi):
            raise ShiftError(f"pole at the integration limit {pole:.6e} diverges logarithmically")
        return PrincipalValue(_regular(lambda w: f(w) / (pole - w), lo, hi, pole), 0.0)
    radius = min(pole - lo, hi - pole)
    value = _excised(f, pole, lo, hi, radius)
    if not check:
        return PrincipalValue(value, 0.0)
    half = _excised(f, pole, lo, hi, 0.5 * radius)
    scale = max(abs(value), abs(half))
    change = abs(value - half) / scale if scale > 0 else 0.0
    if change > PV_TOLERANCE:
        raise ShiftError(
            f"principal value at pole {pole:.6e} not converged under window halving "
            f"(relative change {change:.3e})"
        )
    return PrincipalValue(value, change)


def _regular(g, lo, hi, pole=None, atol=0.0):
    points = None
    if pole is not None:
        # geometric breakpoints resolve the 1/(pole - w) scale next to the pole
        d = min(abs(pole - lo), abs(pole - hi))
        steps = d * 10.0 ** np.arange(1, 16)
        cand = np.concatenate([pole - steps, pole + steps])
        cand = cand[(cand > lo) & (cand < hi)]
        if len(cand):
            points = np.sort(cand)
    val, _ = quad(g, lo, hi, epsabs=atol, epsrel=_QUAD_RTOL, limit=_QUAD_LIMIT, points=points)
    return val


def _excised(f, pole, lo, hi, radius):
    # the folded difference quotient is rounding-limited for tiny windows
    atol = _QUAD_RTOL * 0.1 * max(abs(f(lo)), abs(f(hi)), abs(f(pole)))
    total = _regular(lambda s: (f(pole - s) - f(pole + s)) / s, 0.0, radius, atol=atol)
    if pole - radius > lo:
        total += _regular(lambda w: f(w) / (pole - w), lo, pole - radius, pole)
    if pole + radius < hi:
        total += _regular(lambda w: f(w) / (pole - w), pole + radius, hi, pole)
    return total


def toy_integral(pole: float, omega_debye: float) -> float:
    """Closed form of ``PV integral_0^w_D w / (pole - w) dw``."""
    return -omega_debye - pole * math.log(abs((pole - omega_debye) / pole))


class _Kernels:
    """``J0`` and ``S`` for one solid; memoized per argument."""

    def __init__(self, solid, check: bool = True):
        self.wd = solid.omega_debye
        self.temperature = solid.temperature
        self.check = check
        self.refinement = 0.0
        self._j0: dict[float, float] = {}
        self._jt: dict[float, float] = {}

    def _pv(self, f, a):
        res = principal_value(f, a, 0.0, self.wd, self.check)
        self.refinement = max(self.refinement, res.refinement)
        return res.value

    def j0(self, a: float) -> float:
        if a == 0.0:
            return -self.wd
        val = self._j0.get(a)
        if val is None:
            val = self._j0[a] = self._pv(lambda w: w, a)
        return val

    def jt(self, a: float) -> float:
        if self.temperature == 0:
            return 0.0
        val = self._jt.get(a)
        if val is None:
            t = self.temperature
            val = self._jt[a] = self._pv(lambda w: float(_nbar_omega(w, t)), a)
        return val

    def s(self, a: float) -> float:
        if a == 0.0 or self.temperature == 0:
            return 0.0
        if a < 0:
            return -self.s(-a)
        return 0.5 * (self.jt(a) - self.jt(-a))


@dataclass(frozen=True)
class ShiftResult:
    """Frequency shift of the ``(l, k)`` coherence (rad/s).

    ``pv_refinement`` is the largest relative change of any principal value
    under window halving; ``truncation_residual`` is the continuum
    contribution from the top decade of the energy range.
    """

    l: int
    k: int
    delta_zero: float
    delta_thermal: float
    pv_refinement: float
    truncation_residual: float

    @property
    def total(self) -> float:
        return self.delta_zero + self.delta_thermal


def shift_terms(omega_l, omega_k, f_l, f_k, solid, kernels: _Kernels | None = None):
    """Zero and thermal shift from intermediate states with energies ``mu``.

    ``omega_l = E_l - E_mu`` and ``omega_k = E_k - E_mu`` per intermediate
    state; ``f_l``, ``f_k`` are the forces ``F_lmu``, ``F_kmu`` already
    multiplied by the square root of any quadrature weight.
    """
    kern = kernels or _Kernels(solid)
    c = 3.0 * u.HBAR / (solid.mass * solid.omega_debye**3)
    d0 = dt = 0.0
    for wl, wk, fl, fk in zip(omega_l, omega_k, f_l, f_k):
        fl2, fk2 = fl * fl, fk * fk
        d0 += fl2 * kern.j0(float(wl)) - fk2 * kern.j0(float(wk))
        dt += fl2 * kern.s(float(wl)) - fk2 * kern.s(float(wk))
    return 0.5 * c * d0, c * dt


def frequency_shift(catalog: SpectrumCatalog, l: int, k: int, solid,
                    bank: ContinuumBank | None = None, include_free: bool = True,
                    e_max: float | None = None, nodes: int = 48,
                    check: bool = True) -> ShiftResult:
    """Shift ``Delta_lk`` summed over all bound levels and the continuum.

    Continuum energies run up to ``max(E_l, E_k) + 3 w_D``; the integral uses
    Gauss-Legendre nodes in ``log E``.
    """
    n = len(catalog)
    for idx in (l, k):
        if not 0 <= idx < n:
            raise IndexError(f"level {idx} is not in the catalog")
    force = force_matrix(catalog)
    e = catalog.energies
    kern = _Kernels(solid, check)
    d0, dt = shift_terms(e[l] - e, e[k] - e, force[l], force[k], solid, kern)
    residual = 0.0
    if include_free:
        if e_max is None:
            e_max = max(e[l], e[k]) + 3.0 * solid.omega_debye
        if e_max > 0:
            bank = bank or ContinuumBank(catalog)
            floor = min(e_max, 2.0 * math.pi * 1e6)
            energies, weights = log_quadrature(e_max * 1e-9, e_max, nodes, floor)
            cols = np.array([bank.bound_column(x) for x in energies])
            sw = np.sqrt(weights)
            parts0 = np.zeros(len(energies))
            partst = np.zeros(len(energies))
            for i, x in enumerate(energies):
                parts0[i], partst[i] = shift_terms(
                    [e[l] - x], [e[k] - x], [cols[i, l] * sw[i]], [cols[i, k] * sw[i]], solid, kern)
            d0 += parts0.sum()
            dt += partst.sum()
            top = energies > 0.1 * e_max
            residual = float(abs(parts0[top].sum() + partst[top].sum()))
    return ShiftResult(l, k, d0, dt, kern.refinement, residual)
