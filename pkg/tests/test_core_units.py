import math

import pytest
from hypothesis import given, strategies as st

from phonon_decay import units as u
from phonon_decay.config import (ConfigError, DebyeSolid, default_config, default_config_text,
                                 parse_config, serialize_config, solid_derive)


def test_energy_units_are_angular():
    assert u.to_internal(1.0, "Hz", u.ENERGY) == pytest.approx(2 * math.pi)
    assert u.to_internal(1.56, "kHz um^3", u.ENERGY_LENGTH3) == pytest.approx(2 * math.pi * 1.56e-15)
    assert u.hz(u.from_hz(3.7e12)) == pytest.approx(3.7e12)


def test_compound_units():
    scale, dim = u.parse_unit("g/cm^3")
    assert scale == pytest.approx(1e3) and dim == u.MASS_DENSITY
    assert u.parse_unit("1/nm")[1] == u.INV_LENGTH
    assert u.parse_unit("nm^-1")[0] == pytest.approx(1e9)
    assert u.parse_unit("km/s")[1] == u.VELOCITY


def test_wrong_dimension_rejected():
    with pytest.raises(u.UnitError, match="expected"):
        u.to_internal(1.0, "kg", u.LENGTH)
    with pytest.raises(u.UnitError, match="unknown unit"):
        u.parse_unit("furlong")


@given(st.floats(1e-30, 1e30), st.sampled_from(["Hz", "MHz", "nm", "um^3", "kg", "uK", "m/s"]))
def test_internal_round_trip(value, unit):
    assert u.from_internal(u.to_internal(value, unit), unit) == pytest.approx(value, rel=1e-14)


def test_debye_constants_of_silica():
    q, w, t = solid_derive(9.98e-26, 2200.0 / 9.98e-26, 5960.0)
    assert q / 100 == pytest.approx(1.093e8, rel=1e-2)
    assert u.hz(w) == pytest.approx(10.4e12, rel=1e-2)
    assert t == pytest.approx(498.0, rel=1e-2)


def test_solid_rejects_bad_input():
    with pytest.raises(ConfigError):
        DebyeSolid(9.98e-26, -1.0, 5960.0, 300.0)
    with pytest.raises(ConfigError):
        DebyeSolid(9.98e-26, 1e28, 5960.0, -1.0)


def test_bundled_config():
    cfg = default_config()
    assert cfg.potential.alpha == pytest.approx(5.3e10)
    assert cfg.solid.temperature == 300.0
    assert cfg.gas_temperature == pytest.approx(200e-6)
    assert cfg.box_length == pytest.approx(1e-3)
    assert cfg.target_level == 300


def test_serialize_round_trip():
    cfg = default_config()
    again = parse_config(serialize_config(cfg))
    assert again.physics_hash() == cfg.physics_hash()
    assert again.spectrum_hash() == cfg.spectrum_hash()


def test_spectrum_hash_ignores_bath():
    cfg = default_config()
    warm = cfg.with_bath_temperature(30.0)
    assert warm.spectrum_hash() == cfg.spectrum_hash()
    assert warm.physics_hash() != cfg.physics_hash()


@pytest.mark.parametrize(
    "edit, message",
    [
        (("alpha = 53 nm^-1", "alpha = 53 nm"), "alpha"),
        (("box_length = 1 mm", ""), "box_length: missing"),
        (("x_outer = 500 nm", "x_outer = 500 nm\nx_outer = 400 nm"), "duplicate"),
        (("x_outer = 500 nm", "x_outer = 500 nm\nbogus = 1"), "unknown key"),
        (("c3 = 1.56 kHz um^3", "c3 = -1.56 kHz um^3"), "c3"),
        (("continuum_mesh = 64", "continuum_mesh = 6.5"), "integer"),
        (("box_length = 1 mm", "box_length = 100 nm"), "box_length must exceed x_outer"),
    ],
)
def test_config_errors_name_the_key(edit, message):
    text = default_config_text().replace(*edit)
    with pytest.raises(ConfigError, match=message):
        parse_config(text)
