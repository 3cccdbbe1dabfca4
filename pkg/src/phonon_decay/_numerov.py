"""Compiled Numerov kernels on a uniform mapped coordinate.

The equation is ``u''(s) = -F(s) u(s)`` with unit step in ``s`` and
``F = W * E - V``. The Numerov weight uses ``F - F**3 / 240``, which removes
the leading phase error for locally constant ``F`` and lifts the scheme from
fourth to sixth order on smooth grids.
"""

from __future__ import annotations

import math

import numba
import numpy as np

_BIG = 1e150
_SMALL = 1e-150
_SEED = 1e-30


@numba.njit(cache=True, inline="always")
def _weight(f):
    return 1.0 + (f - f * f * f / 240.0) / 12.0


@numba.njit(cache=True)
def count_nodes(energy, w, v, i_min, decay):
    """Sign changes of the outward solution, up to the evanescent cut-off.

    Integration stops once the solution has been classically forbidden beyond
    ``i_min`` for an accumulated ``sum(sqrt(-F)) > decay``.
    """
    n = w.shape[0]
    u0 = 0.0
    u1 = _SEED
    f0 = _weight(w[0] * energy - v[0])
    f1 = _weight(w[1] * energy - v[1])
    nodes = 0
    acc = 0.0
    for i in range(1, n - 1):
        fi = w[i + 1] * energy - v[i + 1]
        f2 = _weight(fi)
        u2 = ((12.0 - 10.0 * f1) * u1 - f0 * u0) / f2
        if u2 * u1 < 0.0:
            nodes += 1
        if fi < 0.0 and i > i_min:
            acc += math.sqrt(-fi)
            if acc > decay:
                break
        else:
            acc = 0.0
        if abs(u2) > _BIG:
            u2 *= _SMALL
            u1 *= _SMALL
        u0 = u1
        u1 = u2
        f0 = f1
        f1 = f2
    return nodes


@numba.njit(cache=True)
def turning_and_end(energy, w, v, i_min, decay):
    """Index of the outermost classically allowed node and the evanescent end.

    Returns ``(m, i_end, acc)`` where ``acc`` is the accumulated decay exponent
    between ``m`` and ``i_end`` (capped at ``decay``).
    """
    n = w.shape[0]
    m = i_min
    for i in range(n - 1, i_min - 1, -1):
        if w[i] * energy - v[i] >= 0.0:
            m = i
            break
    # keep the matching node interior when the allowed region reaches the wall
    m = min(m, n - 3)
    acc = 0.0
    i_end = n - 1
    for i in range(m + 1, n):
        fi = w[i] * energy - v[i]
        if fi < 0.0:
            acc += math.sqrt(-fi)
        if acc > decay:
            i_end = i
            break
    return m, i_end, min(acc, decay)


@numba.njit(cache=True)
def outward(energy, w, v, i_stop):
    """Outward solution from ``u[0] = 0`` up to and including ``i_stop``."""
    u = np.zeros(i_stop + 1)
    u[1] = _SEED
    f0 = _weight(w[0] * energy - v[0])
    f1 = _weight(w[1] * energy - v[1])
    for i in range(1, i_stop):
        f2 = _weight(w[i + 1] * energy - v[i + 1])
        u[i + 1] = ((12.0 - 10.0 * f1) * u[i] - f0 * u[i - 1]) / f2
        if abs(u[i + 1]) > _BIG:
            for j in range(i + 2):
                u[j] *= _SMALL
        f0 = f1
        f1 = f2
    return u


@numba.njit(cache=True)
def inward(energy, w, v, i_start, i_stop):
    """Inward solution from ``u[i_start] = 0`` down to ``i_stop``.

    Returns an array indexed like the grid over ``[i_stop, i_start]``.
    """
    u = np.zeros(i_start + 1)
    u[i_start - 1] = _SEED
    f2 = _weight(w[i_start] * energy - v[i_start])
    f1 = _weight(w[i_start - 1] * energy - v[i_start - 1])
    for i in range(i_start - 1, i_stop, -1):
        f0 = _weight(w[i - 1] * energy - v[i - 1])
        u[i - 1] = ((12.0 - 10.0 * f1) * u[i] - f2 * u[i + 1]) / f0
        if abs(u[i - 1]) > _BIG:
            for j in range(i - 1, i_start + 1):
                u[j] *= _SMALL
        f2 = f1
        f1 = f0
    return u


@numba.njit(cache=True)
def mismatch(energy, w, v, m, i_end):
    """Difference of discrete log-derivatives at the matching node ``m``."""
    uo = outward(energy, w, v, m + 1)
    ui = inward(energy, w, v, i_end, m)
    return uo[m + 1] / uo[m] - ui[m + 1] / ui[m]


@numba.njit(cache=True)
def lagrange_interp(xs, ys, xt, order):
    """Piecewise Lagrange interpolation through ``order`` neighbouring nodes."""
    n = xs.shape[0]
    out = np.zeros(xt.shape[0])
    half = order // 2
    j = 0
    for t in range(xt.shape[0]):
        x = xt[t]
        while j < n - 2 and xs[j + 1] <= x:
            j += 1
        lo = j - half + 1
        if lo < 0:
            lo = 0
        if lo + order > n:
            lo = n - order
        acc = 0.0
        for a in range(lo, lo + order):
            term = ys[a]
            for b in range(lo, lo + order):
                if b != a:
                    term *= (x - xs[b]) / (xs[a] - xs[b])
            acc += term
        out[t] = acc
    return out


@numba.njit(cache=True)
def lagrange_scatter(xs, xt, ct, order):
    """Adjoint of :func:`lagrange_interp`: ``z`` with ``z . ys == ct . interp(ys)``."""
    n = xs.shape[0]
    z = np.zeros(n)
    half = order // 2
    j = 0
    for t in range(xt.shape[0]):
        x = xt[t]
        while j < n - 2 and xs[j + 1] <= x:
            j += 1
        lo = j - half + 1
        if lo < 0:
            lo = 0
        if lo + order > n:
            lo = n - order
        for a in range(lo, lo + order):
            term = ct[t]
            for b in range(lo, lo + order):
                if b != a:
                    term *= (x - xs[b]) / (xs[a] - xs[b])
            z[a] += term
    return z


_GL_T = np.array([-0.9324695142031521, -0.6612093864662645, -0.2386191860831969,
                  0.2386191860831969, 0.6612093864662645, 0.9324695142031521])
_GL_W = np.array([0.1713244923791704, 0.3607615730481386, 0.4679139345726910,
                  0.4679139345726910, 0.3607615730481386, 0.1713244923791704])


@numba.njit(cache=True, inline="always")
def _density(x, c3, a_rep, alpha, const):
    val = a_rep * math.exp(-alpha * x) + const
    if c3 != 0.0:
        val += c3 / (x * x * x)
    return val


@numba.njit(cache=True)
def map_nodes(x0, x_end, step, c3, a_rep, alpha, const, gl_t, gl_w):
    """Nodes with ``integral_{x[i-1]}^{x[i]} sqrt(g) dx = step`` for
    ``g = c3/x^3 + a_rep exp(-alpha x) + const``, up to the first node past
    ``x_end``. Each interval is solved by Newton on a 6-point Gauss rule.
    """
    cap = 1024
    out = np.empty(cap)
    out[0] = x0
    n = 1
    x = x0
    while x < x_end:
        hx = step / math.sqrt(_density(x, c3, a_rep, alpha, const))
        y = x + step / math.sqrt(_density(x + 0.5 * hx, c3, a_rep, alpha, const))
        for _ in range(4):
            half = 0.5 * (y - x)
            mid = 0.5 * (y + x)
            acc = 0.0
            for j in range(6):
                acc += gl_w[j] * math.sqrt(_density(mid + half * gl_t[j], c3, a_rep, alpha, const))
            acc *= half
            dy = (acc - step) / math.sqrt(_density(y, c3, a_rep, alpha, const))
            y -= dy
            if abs(dy) <= 1e-15 * y:
                break
        if n == cap:
            cap *= 2
            grown = np.empty(cap)
            grown[:n] = out[:n]
            out = grown
        out[n] = y
        n += 1
        x = y
    return out[:n]
