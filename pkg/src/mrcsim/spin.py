"""Closed-form spin-1 rotations.

For a unit vector n the spin-1 operator A = n.F satisfies A^3 = A, so

    exp(-i theta A) = 1 - i sin(theta) A - (1 - cos(theta)) A^2.

Rows of the state array are ordered m = -1, 0, +1.
"""

import numpy as np

_R2 = np.sqrt(0.5)

FX = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) * _R2
FY = np.array([[0, 1j, 0], [-1j, 0, 1j], [0, -1j, 0]], dtype=complex) * _R2
FZ = np.diag([-1.0, 0.0, 1.0]).astype(complex)


def _apply_axis(psi, nx, ny, nz):
    # (n.F) psi with F+|-1> = sqrt2|0>, F+|0> = sqrt2|+1>
    lo, mid, hi = psi
    if ny is None:
        out = np.empty_like(psi)
        out[0] = nx * _R2 * mid - nz * lo
        out[1] = nx * _R2 * (lo + hi)
        out[2] = nx * _R2 * mid + nz * hi
        return out
    n_plus = (nx + 1j * ny) * _R2
    n_minus = (nx - 1j * ny) * _R2
    out = np.empty_like(psi)
    out[0] = n_plus * mid - nz * lo
    out[1] = n_minus * lo + n_plus * hi
    out[2] = n_minus * mid + nz * hi
    return out


def rotate(psi, hx, hz, dt, hy=None):
    """Return exp(-i (hx Fx + hy Fy + hz Fz) dt) psi.

    ``hx``, ``hy`` and ``hz`` broadcast against the trailing axis of
    ``psi``; they are angular frequencies in the same time unit as ``dt``.
    """
    hx = np.asarray(hx, dtype=float)
    hz = np.asarray(hz, dtype=float)
    h2 = hx * hx + hz * hz
    if hy is not None:
        hy = np.asarray(hy, dtype=float)
        h2 = h2 + hy * hy
    h = np.sqrt(h2)
    safe = np.where(h > 0, h, 1.0)
    nx, nz = hx / safe, hz / safe
    ny = hy / safe if hy is not None else None
    theta = h * dt
    s = np.sin(theta)
    c = 2 * np.sin(0.5 * theta) ** 2
    a = _apply_axis(psi, nx, ny, nz)
    aa = _apply_axis(a, nx, ny, nz)
    return psi - 1j * s * a - c * aa


def rotation_matrix(hx, hz, dt, hy=0.0):
    """Dense 3x3 version of :func:`rotate`, for tests and small problems."""
    return rotate(np.eye(3, dtype=complex), hx, hz, dt, hy=hy if hy else None)


def spin_density(psi):
    """Local <F> vector, returned as (Fx, Fy, Fz) arrays."""
    lo, mid, hi = psi
    f_plus = np.sqrt(2.0) * (np.conj(mid) * lo + np.conj(hi) * mid)
    return f_plus.real, f_plus.imag, np.abs(hi) ** 2 - np.abs(lo) ** 2
