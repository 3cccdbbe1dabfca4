"""Adsorption, heating and cooling of a thermal cesium gas in a 1 mm box.

Prints the adsorption rate ``G_T0`` next to the free-to-free heating and
cooling rates for a few gas temperatures around 200 uK. About a minute.
"""

from phonon_decay import default_config, solve_bound_spectrum
from phonon_decay.coupling import ContinuumBank, force_matrix
from phonon_decay.rates import thermal_adsorption, thermal_free_free


def main():
    cfg = default_config()
    cat = solve_bound_spectrum(cfg)
    force_matrix(cat)
    bank = ContinuumBank(cat)
    print(f"{'T0 (uK)':>8} {'G_T0':>11} {'Q_a':>11} {'Q_e':>11} {'G/Q_a':>7}")
    for t0 in (100e-6, 200e-6, 400e-6):
        g = thermal_adsorption(t0, bank, cfg.solid, cfg.box_length)[1]
        ff = thermal_free_free(t0, bank, cfg.solid, cfg.box_length, mesh=48)
        print(f"{t0 * 1e6:8.0f} {g:11.3e} {ff.q_a:11.3e} {ff.q_e:11.3e} {g / ff.q_a:7.3f}")


if __name__ == "__main__":
    main()
