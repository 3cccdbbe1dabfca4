import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phonon_decay import units as u
from phonon_decay.dynamics import (DynamicsError, Generator, LevelSubset, StepSizeError,
                                   build_generator, evolve, propagate, rate_evolve, steady_state,
                                   two_level)


def _boltzmann_pair(solid, omega):
    # rates of a single bath transition with detailed balance
    n = 1.0 / math.expm1(u.HBAR * omega / (u.K_B * solid.temperature))
    return 1e9 * n, 1e9 * (n + 1)


def test_two_level_population_block():
    gen = two_level(1e12, rate_up=3.0, rate_down=5.0)
    assert np.allclose(gen.population_block, [[-3.0, 5.0], [3.0, -5.0]])


def test_two_level_boltzmann_fixed_point(solid):
    omega = u.from_hz(5e12)
    up, down = _boltzmann_pair(solid, omega)
    gen = two_level(omega, up, down)
    p = steady_state(gen)
    assert p[1] / p[0] == pytest.approx(math.exp(-u.HBAR * omega / (u.K_B * solid.temperature)), rel=1e-12)
    traj = rate_evolve([1.0, 0.0], gen, [50 / (up + down)])
    assert traj.populations[-1] == pytest.approx(p, abs=1e-6)


def test_coherence_decays_and_oscillates():
    omega, up, down = 1e10, 2e7, 3e7
    shift = np.array([[0.0, -4e8], [4e8, 0.0]])
    gen = Generator(np.array([0.0, omega]), np.array([[0.0, down], [up, 0.0]]), np.zeros(2), shift)
    rho0 = np.full((2, 2), 0.5, dtype=complex)
    t = 3e-8
    rho = propagate(rho0, gen, [t]).states[-1]
    rate = 0.5 * (up + down)
    assert gen.coherence_rate(1, 0) == rate
    # d rho_10 / dt = -(i (w + D) + G) rho_10
    assert rho[1, 0] == pytest.approx(0.5 * np.exp(-(1j * (omega + 4e8) + rate) * t), rel=1e-10)


def test_columns_sum_to_leakage():
    rng = np.random.default_rng(1)
    gain = rng.uniform(0, 1e6, (4, 4))
    leak = rng.uniform(0, 1e5, 4)
    gen = Generator(np.arange(4) * 1e9, gain, leak)
    assert np.allclose(gen.population_block.sum(axis=0), -leak)


def test_zero_generator_is_identity():
    gen = Generator(np.zeros(1) + 0.0, np.zeros((1, 1)), np.zeros(1))
    rho = np.array([[1.0 + 0j]])
    assert np.array_equal(evolve(rho, gen, 1.0, 0.1).states[-1], rho)


def test_pure_coherence_keeps_modulus():
    gen = Generator(np.array([0.0, 2e9]), np.zeros((2, 2)), np.zeros(2))
    rho0 = np.full((2, 2), 0.5, dtype=complex)
    traj = evolve(rho0, gen, 1e-8, 1e-11)
    assert np.allclose(np.abs(traj.states[:, 0, 1]), 0.5, atol=1e-10)


def _closed(n, seed=0):
    rng = np.random.default_rng(seed)
    gain = rng.uniform(1e5, 1e6, (n, n))
    return Generator(np.sort(rng.uniform(0, 1e7, n)), gain, np.zeros(n))


def test_trace_conserved_in_closed_subset():
    gen = _closed(5)
    rho0 = np.diag([0.2] * 5).astype(complex)
    rho0[0, 3] = rho0[3, 0] = 0.1
    dt = 0.1 / gen.max_frequency()
    traj = evolve(rho0, gen, 1e4 * dt, dt, sample_every=1000)
    assert len(traj.times) == 11
    assert np.max(np.abs(traj.traces - 1.0)) < 1e-10


def test_rk4_is_fourth_order():
    gen = _closed(3, seed=2)
    rho0 = np.diag([1.0, 0.0, 0.0]).astype(complex)
    t = 2e-6
    exact = propagate(rho0, gen, [t]).states[-1]
    dt = 0.1 / gen.max_frequency()
    errs = [np.max(np.abs(evolve(rho0, gen, t, h).states[-1] - exact)) for h in (dt, dt / 2)]
    assert 12 < errs[0] / errs[1] < 20


def test_rate_equation_matches_density_diagonal():
    rng = np.random.default_rng(3)
    gen = Generator(np.sort(rng.uniform(0, 1e7, 4)), rng.uniform(1e5, 1e6, (4, 4)), rng.uniform(0, 1e5, 4))
    p0 = np.array([0.1, 0.2, 0.3, 0.4])
    times = np.linspace(0, 5e-6, 6)
    rate = rate_evolve(p0, gen, times)
    full = propagate(np.diag(p0).astype(complex), gen, times)
    assert np.max(np.abs(rate.populations - full.populations)) < 1e-8
    assert np.allclose(rate.populations.sum(1) + rate.leaked, 1.0, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3))
def test_populations_stay_physical(weights):
    total = sum(weights)
    p0 = np.array(weights) / total if total > 0 else np.array([1.0, 0, 0])
    gen = _closed(3, seed=5)
    dt = 0.1 / gen.max_frequency()
    traj = evolve(np.diag(p0).astype(complex), gen, 200 * dt, dt, sample_every=50)
    assert np.all(traj.populations > -1e-12)
    assert np.allclose(traj.traces, p0.sum(), atol=1e-12)


def test_step_size_guard():
    gen = _closed(2)
    with pytest.raises(StepSizeError):
        evolve(np.diag([1.0, 0.0]).astype(complex), gen, 1.0, 1.0 / gen.max_frequency())


def test_bad_initial_state():
    gen = _closed(2)
    with pytest.raises(ValueError, match="Hermitian"):
        evolve(np.array([[0.5, 0.1], [0.2, 0.5]], dtype=complex), gen, 1e-9, 1e-12)
    with pytest.raises(ValueError, match="populations"):
        evolve(np.diag([-0.5, 1.0]).astype(complex), gen, 1e-9, 1e-12)


def test_negative_population_is_reported():
    # a negative "gain" smuggled in after validation drives populations below zero
    gen = _closed(2)
    gen.matrix[0, 0] = 1e12
    gen.matrix[3, 0] = -1e12
    with pytest.raises(DynamicsError, match="population"):
        evolve(np.diag([1.0, 0.0]).astype(complex), gen, 1e-9, 1e-12)


def test_subset_validation(catalog):
    sub = LevelSubset.from_catalog(catalog, [5, 2, 9])
    assert sub.indices == (2, 5, 9)
    with pytest.raises(DynamicsError, match="not in the catalog"):
        LevelSubset.from_catalog(catalog, [1, 10_000])
    with pytest.raises(ValueError):
        LevelSubset((1, 1), np.array([0.0, 1.0]))


def test_shallow_levels_leak_to_continuum(catalog, solid, bank):
    n = len(catalog)
    deep = LevelSubset.from_catalog(catalog, [100, 101, 102])
    shallow = LevelSubset.from_catalog(catalog, [n - 3, n - 2, n - 1])
    gd = build_generator(catalog, deep, solid, bank=bank)
    gs = build_generator(catalog, shallow, solid, bank=bank)
    gd_bound = build_generator(catalog, deep, solid, include_free=False)
    # deep levels cannot reach the continuum with one phonon
    assert np.array_equal(gd.leakage, gd_bound.leakage)
    free = gs.leakage - build_generator(catalog, shallow, solid, include_free=False).leakage
    assert np.all(free > 0)


def test_secular_gain_is_optional(catalog, solid):
    sub = LevelSubset.from_catalog(catalog, [0, 1, 2])
    plain = build_generator(catalog, sub, solid, include_free=False)
    secular = build_generator(catalog, sub, solid, include_free=False,
                              include_offdiagonal_gain=True, secular_window=solid.omega_debye)
    assert plain.coherence_gain == {}
    assert secular.coherence_gain
    assert np.array_equal(plain.population_block, secular.population_block)
