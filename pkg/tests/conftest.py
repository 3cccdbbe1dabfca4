import numpy as np
import pytest

from phonon_decay import units as u
from phonon_decay.config import DebyeSolid, default_config
from phonon_decay.coupling import ContinuumBank, force_matrix
from phonon_decay.rates import depletion_rates
from phonon_decay.potential import HarmonicPotential, PotentialParams, SurfacePotential
from phonon_decay.spectrum import solve_bound_spectrum

# acceptance results collected for the terminal summary: number -> (passed, detail)
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def base_config():
    return default_config()


@pytest.fixture(scope="session")
def solid(base_config):
    return base_config.solid


@pytest.fixture(scope="session")
def surface_params():
    return PotentialParams(u.from_hz(1.56e-15), u.from_hz(1.6e18), 5.3e10, 2.21e-25)


@pytest.fixture(scope="session")
def surface(surface_params):
    return SurfacePotential(surface_params)


@pytest.fixture(scope="session")
def catalog(base_config):
    cat = solve_bound_spectrum(base_config)
    force_matrix(cat)
    return cat


@pytest.fixture(scope="session")
def bank(catalog):
    return ContinuumBank(catalog)


@pytest.fixture(scope="session")
def depletion(catalog, solid, bank):
    return depletion_rates(catalog, solid, bank)


@pytest.fixture(scope="session")
def harmonic():
    # cesium in a 100 GHz trap, walls far out in the Gaussian tails
    mass = 2.21e-25
    omega = u.from_hz(1e11)
    length = np.sqrt(u.HBAR / (mass * omega))
    return HarmonicPotential(mass, omega, x0=0.0, half_width=14 * length)


@pytest.fixture
def cold_solid():
    return DebyeSolid.from_mass_density(9.98e-26, 2200.0, 5960.0, 0.0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
