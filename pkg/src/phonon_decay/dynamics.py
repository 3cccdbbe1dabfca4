"""Density-matrix master equation over a truncated set of bound levels.

Levels outside the subset are absorbing: population that leaves for them
(or for the continuum) is lost from the trace and never comes back.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .coupling import force_matrix
from .rates import depletion_rates, rate_function, rate_matrices
from .spectrum import SpectrumCatalog

log = logging.getLogger(__name__)

NEGATIVE_TOLERANCE = 1e-8
STEP_FACTOR = 0.1


class DynamicsError(RuntimeError):
    pass


class StepSizeError(DynamicsError):
    pass


@dataclass(frozen=True)
class LevelSubset:
    """Ordered bound levels of a catalog, ascending in energy."""

    indices: tuple
    energies: np.ndarray

    def __post_init__(self):
        if len(self.indices) == 0:
            raise ValueError("a level subset must be nonempty")
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("a level subset must not repeat levels")
        if np.any(np.diff(self.energies) <= 0):
            raise ValueError("subset levels must be in ascending energy")

    @classmethod
    def from_catalog(cls, catalog: SpectrumCatalog, indices) -> "LevelSubset":
        idx = tuple(int(i) for i in indices)
        n = len(catalog)
        missing = [i for i in idx if not 0 <= i < n]
        if missing:
            raise DynamicsError(f"levels {missing} are not in the catalog ({n} levels)")
        order = sorted(idx, key=lambda i: catalog.energies[i])
        return cls(tuple(order), catalog.energies[list(order)].copy())

    def __len__(self):
        return len(self.indices)


@dataclass
class Generator:
    """Linear superoperator acting on ``vec(rho)`` (row-major).

    ``gain[j, i]`` is the rate ``i -> j`` inside the subset, ``leakage[i]``
    the rate from ``i`` to anything outside it, and ``shifts[j, i]`` the
    frequency shift of the ``(j, i)`` coherence.
    """

    energies: np.ndarray
    gain: np.ndarray
    leakage: np.ndarray
    shifts: np.ndarray | None = None
    coherence_gain: dict = field(default_factory=dict)
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.energies = np.asarray(self.energies, dtype=float)
        self.gain = np.array(self.gain, dtype=float)
        np.fill_diagonal(self.gain, 0.0)
        self.leakage = np.asarray(self.leakage, dtype=float)
        n = len(self.energies)
        if self.gain.shape != (n, n) or self.leakage.shape != (n,):
            raise ValueError("gain must be n x n and leakage length n")
        if np.any(self.gain < 0) or np.any(self.leakage < 0):
            raise ValueError("rates must be non-negative")
        self.matrix = self._assemble()

    @property
    def size(self) -> int:
        return len(self.energies)

    @property
    def loss(self) -> np.ndarray:
        """Total depletion rate of each level."""
        return self.gain.sum(axis=0) + self.leakage

    @property
    def population_block(self) -> np.ndarray:
        n = self.size
        diag = np.arange(n) * (n + 1)
        return self.matrix[np.ix_(diag, diag)].real

    def coherence_rate(self, j: int, i: int) -> float:
        return 0.5 * (self.loss[j] + self.loss[i])

    def _assemble(self) -> np.ndarray:
        n = self.size
        e = self.energies
        loss = self.loss
        omega = e[:, None] - e[None, :]
        if self.shifts is not None:
            omega = omega + np.asarray(self.shifts, dtype=float)
        damp = 0.5 * (loss[:, None] + loss[None, :])
        mat = np.diag((-1j * omega - damp).ravel()).astype(complex)
        for j in range(n):
            for i in range(n):
                if i != j:
                    mat[j * n + j, i * n + i] += self.gain[j, i]
        for (j, jp, v, vp), coef in self.coherence_gain.items():
            mat[j * n + jp, v * n + vp] += coef
        return mat

    def apply(self, rho: np.ndarray) -> np.ndarray:
        n = self.size
        return (self.matrix @ rho.reshape(n * n)).reshape(n, n)

    def max_frequency(self) -> float:
        e = self.energies
        spread = float(e.max() - e.min())
        shift = 0.0 if self.shifts is None else float(np.max(np.abs(self.shifts)))
        return spread + shift + float(self.loss.max(initial=0.0))


def generator_from_rates(energies, gain, leakage=None, shifts=None) -> Generator:
    n = len(energies)
    leak = np.zeros(n) if leakage is None else leakage
    return Generator(np.asarray(energies, dtype=float), gain, leak, shifts)


def two_level(omega: float, rate_up: float, rate_down: float) -> Generator:
    """Closed two-level system with the upper level ``omega`` above the lower."""
    gain = np.array([[0.0, rate_down], [rate_up, 0.0]])
    return Generator(np.array([0.0, omega]), gain, np.zeros(2))


def _secular_terms(energies, force, solid, window):
    """Coherence-to-coherence gain within the secular window."""
    n = len(energies)
    out = {}
    for j in range(n):
        for jp in range(n):
            if j == jp:
                continue
            for v in range(n):
                for vp in range(n):
                    if v == vp or (v == j and vp == jp):
                        continue
                    w1 = energies[v] - energies[j]
                    w2 = energies[vp] - energies[jp]
                    if abs(w1 - w2) > window or w1 == 0 or w2 == 0:
                        continue
                    coef = rate_function(0.5 * (w1 + w2), 1.0, solid) * force[j, v] * force[jp, vp]
                    if coef != 0.0:
                        out[(j, jp, v, vp)] = float(coef)
    return out


def build_generator(catalog: SpectrumCatalog, subset: LevelSubset, solid, *,
                    include_free: bool = True, bank=None, shifts=None,
                    include_offdiagonal_gain: bool = False,
                    secular_window: float | None = None) -> Generator:
    """Generator for ``subset`` with leakage to every other bound level and,
    optionally, to the continuum.

    Parameters
    ----------
    shifts : array_like, optional
        Coherence shifts ``Delta[j, i]`` (rad/s) in subset order; see
        :func:`shift_matrix`.
    include_offdiagonal_gain : bool
        Keep coherence-to-coherence gain whose two transition frequencies
        agree within ``secular_window`` (default one thousandth of ``w_D``).
    """
    idx = list(subset.indices)
    rs = rate_matrices(catalog, solid)
    total = rs.total
    gain = total[np.ix_(idx, idx)]
    out_bound = total[:, idx].sum(axis=0) - gain.sum(axis=0)
    leak = out_bound
    if include_free:
        dep = depletion_rates(catalog, solid, bank)
        leak = leak + dep.gamma_a_free[idx]
    coh = {}
    if include_offdiagonal_gain:
        window = 1e-3 * solid.omega_debye if secular_window is None else secular_window
        f = force_matrix(catalog)[np.ix_(idx, idx)]
        coh = _secular_terms(subset.energies, f, solid, window)
    return Generator(subset.energies, gain, leak, shifts, coh)


def shift_matrix(catalog: SpectrumCatalog, subset: LevelSubset, solid, **kwargs) -> np.ndarray:
    """``Delta[j, i]`` for every ordered pair of the subset."""
    from .shifts import frequency_shift

    n = len(subset)
    out = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            res = frequency_shift(catalog, subset.indices[a], subset.indices[b], solid, **kwargs)
            out[a, b] = res.total
            # Delta_kl = -Delta_lk keeps the derivative Hermitian
            out[b, a] = -res.total
    return out


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.einsum("tii->ti", self.states))

    @property
    def traces(self) -> np.ndarray:
        return self.populations.sum(axis=1)


def _check_rho(rho, n):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (n, n):
        raise ValueError(f"density matrix must be {n} x {n}")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
        raise ValueError("density matrix must be Hermitian")
    d = rho.diagonal().real
    if np.any(d < -NEGATIVE_TOLERANCE) or np.any(d > 1 + NEGATIVE_TOLERANCE):
        raise ValueError("populations must lie in [0, 1]")
    if d.sum() > 1 + 1e-9:
        raise ValueError("trace must not exceed 1")
    return rho


def _clamp(rho, t):
    d = rho.diagonal().real
    worst = d.min()
    if worst < -NEGATIVE_TOLERANCE:
        raise DynamicsError(f"population {worst:.3e} at t = {t:.6e} s: integration failed")
    if worst < 0:
        log.warning("clamping population %.3e to zero at t = %.6e s", worst, t)
        idx = np.nonzero(d < 0)[0]
        rho[idx, idx] = 0.0
    return rho


def evolve(rho0, generator: Generator, t_final: float, dt: float,
           sample_every: int = 1) -> Trajectory:
    """Classical RK4 from ``rho0`` to ``t_final``.

    The step is shortened so that a whole number of steps reaches
    ``t_final``; the state is re-symmetrized after every step.
    """
    n = generator.size
    rho = _check_rho(rho0, n).copy()
    limit = STEP_FACTOR / generator.max_frequency() if generator.max_frequency() > 0 else math.inf
    if dt > limit:
        raise StepSizeError(f"dt = {dt:.3e} s exceeds {limit:.3e} s for this generator")
    steps = max(1, math.ceil(t_final / dt - 1e-9))
    h = t_final / steps
    mat = generator.matrix
    y = rho.reshape(n * n)
    times, states = [0.0], [rho.copy()]
    for s in range(1, steps + 1):
        k1 = mat @ y
        k2 = mat @ (y + 0.5 * h * k1)
        k3 = mat @ (y + 0.5 * h * k2)
        k4 = mat @ (y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        r = y.reshape(n, n)
        r = 0.5 * (r + r.conj().T)
        r = _clamp(r, s * h)
        y = r.reshape(n * n)
        if s % sample_every == 0 or s == steps:
            times.append(s * h)
            states.append(r.copy())
    return Trajectory(np.array(times), np.array(states))


def propagate(rho0, generator: Generator, times) -> Trajectory:
    """Exact propagation by the matrix exponential of the superoperator."""
    n = generator.size
    rho = _check_rho(rho0, n)
    y0 = rho.reshape(n * n)
    states = [(expm(generator.matrix * t) @ y0).reshape(n, n) for t in times]
    return Trajectory(np.asarray(times, dtype=float), np.array(states))


@dataclass
class RateTrajectory:
    times: np.ndarray
    populations: np.ndarray
    leaked: np.ndarray


def rate_evolve(populations0, generator: Generator, times) -> RateTrajectory:
    """Diagonal rate equation ``dp/dt = A p`` with an absorbing sink.

    ``leaked`` is the cumulative population lost to levels outside the
    subset, so ``populations.sum(1) + leaked`` stays 1 for normalized input.
    """
    p0 = np.asarray(populations0, dtype=float)
    n = generator.size
    if p0.shape != (n,):
        raise ValueError(f"need {n} populations")
    a = np.zeros((n + 1, n + 1))
    a[:n, :n] = generator.gain - np.diag(generator.loss)
    a[n, :n] = generator.leakage
    y0 = np.append(p0, 0.0)
    out = np.array([expm(a * t) @ y0 for t in times])
    return RateTrajectory(np.asarray(times, dtype=float), out[:, :n], out[:, n])


def steady_state(generator: Generator) -> np.ndarray:
    """Normalized null vector of the population block (closed subsets)."""
    a = generator.population_block
    w, v = np.linalg.eig(a)
    i = int(np.argmin(np.abs(w)))
    p = np.real(v[:, i])
    return p / p.sum()
