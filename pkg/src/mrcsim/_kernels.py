"""Compiled pointwise half of the real-time split step.

Both kernels update ``psi`` in place.  The nonlinearity is
w_r (sqrt(s^2 + kappa rho) - s), or kappa rho when ``cubic`` is set.
"""

import math

import numba


@numba.njit(cache=True, fastmath=True)
def _mean_field(rho, w_r, s, kappa, cubic):
    if kappa == 0.0:
        return 0.0
    if cubic:
        return kappa * rho
    return w_r * (math.sqrt(s * s + kappa * rho) - s)


@numba.njit(cache=True, fastmath=True)
def coupled_local(psi, trap, z, dt, rabi, d0, slope, w_r, s, kappa, cubic):
    """Scalar phase then exp(-i [(d0 - slope z) F_z + rabi F_x] dt) per point."""
    r2 = math.sqrt(0.5)
    for j in range(psi.shape[1]):
        a = psi[0, j]
        b = psi[1, j]
        c = psi[2, j]
        rho = (a.real * a.real + a.imag * a.imag + b.real * b.real + b.imag * b.imag
               + c.real * c.real + c.imag * c.imag)
        v = (trap[j] + _mean_field(rho, w_r, s, kappa, cubic)) * dt
        ph = complex(math.cos(v), -math.sin(v))
        a *= ph
        b *= ph
        c *= ph
        hz = d0 - slope * z[j]
        h = math.sqrt(rabi * rabi + hz * hz)
        if h > 0.0:
            nx = rabi / h * r2
            nz = hz / h
            half = 0.5 * h * dt
            hs = math.sin(half)
            sn = 2.0 * hs * math.cos(half)
            cc = 2.0 * hs * hs
            a1 = nx * b - nz * a
            b1 = nx * (a + c)
            c1 = nx * b + nz * c
            a2 = nx * b1 - nz * a1
            b2 = nx * (a1 + c1)
            c2 = nx * b1 + nz * c1
            a = a - 1j * sn * a1 - cc * a2
            b = b - 1j * sn * b1 - cc * b2
            c = c - 1j * sn * c1 - cc * c2
        psi[0, j] = a
        psi[1, j] = b
        psi[2, j] = c


@numba.njit(cache=True, fastmath=True)
def diagonal_local(psi, m_values, trap, z, dt, d0, slope, w_r, s, kappa, cubic):
    """Uncoupled step: each row m gets exp(-i [V + U(rho) + m delta(z)] dt)."""
    rows = psi.shape[0]
    for j in range(psi.shape[1]):
        rho = 0.0
        for r in range(rows):
            x = psi[r, j]
            rho += x.real * x.real + x.imag * x.imag
        v = trap[j] + _mean_field(rho, w_r, s, kappa, cubic)
        delta = d0 - slope * z[j]
        for r in range(rows):
            arg = (v + m_values[r] * delta) * dt
            psi[r, j] *= complex(math.cos(arg), -math.sin(arg))
