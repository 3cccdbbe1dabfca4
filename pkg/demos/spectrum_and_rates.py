"""Bound spectrum of cesium above silica and the depletion rates of every level.

Run with ``python demos/spectrum_and_rates.py``; takes about ten seconds.
"""

import numpy as np

from phonon_decay import default_config, solve_bound_spectrum
from phonon_decay import units as u
from phonon_decay.coupling import ContinuumBank, force_matrix
from phonon_decay.rates import depletion_rates


def main():
    cfg = default_config()
    cat = solve_bound_spectrum(cfg)
    force_matrix(cat)
    bank = ContinuumBank(cat)
    print(f"{len(cat)} bound levels, E_0 / h = {u.hz(cat.energies[0]):.4e} Hz")
    for temperature in (300.0, 30.0):
        dep = depletion_rates(cat, cfg.solid.at_temperature(temperature), bank)
        print(f"\nT = {temperature:g} K")
        print(f"{'nu':>4} {'E/h (Hz)':>12} {'Gamma_e':>11} {'Gamma_a bound':>14} {'Gamma_a free':>13}")
        for nu in np.linspace(0, len(cat) - 1, 12).astype(int):
            print(f"{nu:4d} {u.hz(cat.energies[nu]):12.4e} {dep.gamma_e[nu]:11.3e} "
                  f"{dep.gamma_a_bound[nu]:14.3e} {dep.gamma_a_free[nu]:13.3e}")


if __name__ == "__main__":
    main()
