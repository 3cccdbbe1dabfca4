import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from phonon_decay import units as u
from phonon_decay.shifts import (ShiftError, _Kernels, frequency_shift, principal_value,
                                 shift_terms, toy_integral)


@pytest.mark.parametrize("fraction", [1e-4, 0.013, 0.5, 0.97, 0.9999])
def test_toy_oracle(solid, fraction):
    wd = solid.omega_debye
    pole = fraction * wd
    res = principal_value(lambda w: w, pole, 0.0, wd)
    assert res.value == pytest.approx(toy_integral(pole, wd), rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.1, 5.0))
def test_agrees_with_cauchy_weight(pole, decay):
    f = lambda w: math.exp(-decay * w)
    ours = principal_value(f, pole, 0.0, 1.0).value
    # scipy computes PV integral f / (w - c)
    ref, _ = quad(f, 0.0, 1.0, weight="cauchy", wvar=pole, epsabs=1e-14, epsrel=1e-12)
    assert ours == pytest.approx(-ref, rel=1e-8, abs=1e-12)


def test_pole_outside_is_regular():
    res = principal_value(lambda w: 1.0, 2.0, 0.0, 1.0)
    assert res.value == pytest.approx(math.log(2.0), rel=1e-12)
    assert res.refinement == 0.0


def test_pole_on_the_limit_raises():
    with pytest.raises(ShiftError, match="limit"):
        principal_value(lambda w: 1.0, 1.0, 0.0, 1.0)


def test_antisymmetric_numerator_cancels():
    # PV integral_{-1}^{1} 1 / (0 - w) dw = 0 by symmetry
    assert abs(principal_value(lambda w: 1.0, 0.0, -1.0, 1.0).value) < 1e-14


def test_halving_invariance_is_reported(solid):
    wd = solid.omega_debye
    res = principal_value(lambda w: w * w, 0.3 * wd, 0.0, wd)
    assert res.refinement < 1e-6


def test_odd_thermal_kernel(solid):
    kern = _Kernels(solid)
    a = 0.2 * solid.omega_debye
    assert kern.s(-a) == -kern.s(a)
    assert kern.s(0.0) == 0.0
    assert kern.j0(0.0) == -solid.omega_debye


def test_diagonal_shift_vanishes(catalog, solid, bank):
    res = frequency_shift(catalog, 120, 120, solid, bank=bank, nodes=16)
    assert res.delta_zero == 0.0 and res.delta_thermal == 0.0


def test_shift_is_antisymmetric(solid):
    rng = np.random.default_rng(4)
    wl, wk = rng.uniform(-1, 1, (2, 6)) * solid.omega_debye
    fl, fk = rng.normal(size=(2, 6)) * 1e20
    a = shift_terms(wl, wk, fl, fk, solid)
    b = shift_terms(wk, wl, fk, fl, solid)
    assert a[0] == pytest.approx(-b[0], rel=1e-14)
    assert a[1] == pytest.approx(-b[1], rel=1e-14)


def test_cold_solid_has_no_thermal_shift(cold_solid):
    wd = cold_solid.omega_debye
    d0, dt = shift_terms([0.3 * wd], [-0.2 * wd], [1e20], [2e20], cold_solid)
    assert dt == 0.0 and d0 != 0.0


def test_thermal_shift_grows_with_temperature(solid):
    wd = solid.omega_debye
    vals = [abs(shift_terms([0.1 * wd], [0.0], [1e20], [0.0], solid.at_temperature(t))[1])
            for t in (30.0, 100.0, 300.0)]
    assert vals[0] < vals[1] < vals[2]


def test_single_term_matches_definition(solid):
    # D0 from one intermediate state equals (c/2) PV integral w / (w_l - w) F^2
    wd = solid.omega_debye
    c = 3 * u.HBAR / (solid.mass * wd**3)
    w_l = 0.4 * wd
    d0, _ = shift_terms([w_l], [0.0], [2e20], [0.0], solid)
    assert d0 == pytest.approx(0.5 * c * 4e40 * toy_integral(w_l, wd), rel=1e-8)


@pytest.mark.slow
def test_adjacent_pair_shift(catalog, solid, bank):
    res = frequency_shift(catalog, 100, 101, solid, bank=bank)
    assert math.isfinite(res.total)
    assert res.pv_refinement < 1e-6
    assert res.truncation_residual < abs(res.total)
