"""Decay of a superposition of two adjacent deep levels.

Evolves ``(|100> + |101>) / sqrt(2)`` under the phonon master equation with
the two levels kept and every other level treated as absorbing, then
compares the coherence with ``exp(-Gamma_lk t) / 2``.
"""

import numpy as np

from phonon_decay import default_config, solve_bound_spectrum
from phonon_decay.coupling import ContinuumBank, force_matrix
from phonon_decay.dynamics import LevelSubset, build_generator, evolve


def main():
    cfg = default_config()
    cat = solve_bound_spectrum(cfg)
    force_matrix(cat)
    subset = LevelSubset.from_catalog(cat, [100, 101])
    gen = build_generator(cat, subset, cfg.solid, bank=ContinuumBank(cat))
    rho0 = np.full((2, 2), 0.5, dtype=complex)
    gamma = gen.coherence_rate(1, 0)
    t_final = 2.0 / gamma
    dt = 0.1 / gen.max_frequency()
    traj = evolve(rho0, gen, t_final, dt, sample_every=max(1, int(t_final / dt) // 8))
    print(f"Gamma_lk = {gamma:.4e} 1/s, {len(traj.times) - 1} samples")
    for t, r in zip(traj.times, traj.states):
        print(f"t = {t:.3e} s  |rho_01| = {abs(r[0, 1]):.6f}  expected {0.5 * np.exp(-gamma * t):.6f}"
              f"  trace = {np.trace(r).real:.6f}")


if __name__ == "__main__":
    main()
