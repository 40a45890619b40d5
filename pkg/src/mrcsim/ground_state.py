"""Imaginary-time preparation of the m = -1 condensate."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import HamiltonianTerms, Propagator
from .errors import NumericalError
from .interactions import Nonlinearity
from .spinor import SpinorField
from .units import CondensateParams, Grid, PhysicalConstants, thomas_fermi_chemical_potential

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroundStateInfo:
    chemical_potential: float  # J
    energy_per_atom: float  # J
    steps: int
    imaginary_time: float  # s
    residual: float  # relative change of mu per ms at exit
    energies: np.ndarray  # internal units, one per check


def thomas_fermi_profile(params: CondensateParams, constants: PhysicalConstants, z,
                         nonlinearity: Nonlinearity | None = None):
    """Normalised Thomas-Fermi density (m^-1) for the same nonlinearity the
    propagator uses."""
    nl = nonlinearity or Nonlinearity(constants, params)
    mu = thomas_fermi_chemical_potential(constants, params, nl)
    return nl.thomas_fermi_density(z, mu) / params.atom_number


def _initial_guess(grid, params, constants, nl):
    z = grid.z
    if params.atom_number > 0:
        dens = thomas_fermi_profile(params, constants, z, nl)
    else:
        dens = np.zeros_like(z)
    # wide Gaussian floor keeps the guess nodeless beyond the TF edge
    width = 2 * math.sqrt(constants.hbar / (constants.atom_mass * params.omega_z))
    floor = np.exp(-(z / width) ** 2)
    psi = np.sqrt(dens + 1e-3 * floor * max(dens.max(), 1 / width))
    return psi / math.sqrt(np.sum(psi**2) * grid.dz)


def solve_ground_state(params: CondensateParams, constants: PhysicalConstants, grid: Grid,
                       tolerance: float = 1e-8, dt_imag: float | None = None,
                       nonlinearity: Nonlinearity | None = None,
                       max_steps: int = 2_000_000, check_every: int = 100,
                       full_output: bool = False):
    """Ground state of the quasi-1D GPE in the harmonic trap, all in m = -1.

    Converged when |mu(tau + dtau) - mu(tau)| / (mu dtau) falls below
    ``tolerance`` with dtau in milliseconds.  The energy is checked to be
    non-increasing between checks.  ``dt_imag`` defaults to 1e-3 / omega_r.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if dt_imag is None:
        dt_imag = 1e-3 / params.omega_r
    if dt_imag <= 0:
        raise ValueError("dt_imag must be positive")
    nl = nonlinearity or Nonlinearity(constants, params)
    terms = HamiltonianTerms(grid, constants, params, nl)
    u = terms.units
    tau = u.to_internal(dt_imag, "time")
    prop = Propagator(terms, -1j * tau)

    psi = np.zeros((3, grid.num_points), dtype=complex)
    psi[0] = _initial_guess(grid, params, constants, nl) * math.sqrt(u.length)
    row = [0]

    mu_old = terms.chemical_potential(psi[row])
    energies = [terms.energy(psi[row])]
    chunk_ms = check_every * dt_imag * 1e3
    steps = 0
    residual = math.inf
    while steps < max_steps:
        psi = prop.run(psi, check_every, active=row, renormalize=True)
        psi[0] = psi[0].real.astype(complex)
        steps += check_every
        e = terms.energy(psi[row])
        if e > energies[-1] + 1e-10 * abs(energies[-1]):
            raise NumericalError("energy increased during imaginary-time propagation",
                                 step=steps, energy=e, previous=energies[-1])
        energies.append(e)
        mu = terms.chemical_potential(psi[row])
        residual = abs(mu - mu_old) / (abs(mu) * chunk_ms)
        mu_old = mu
        if residual < tolerance:
            break
    else:
        raise NumericalError("ground state did not converge", residual=residual, steps=steps)
    log.info("ground state converged after %d steps, residual %.2e", steps, residual)

    state = terms.to_state(psi, 0.0)
    if not full_output:
        return state
    info = GroundStateInfo(
        chemical_potential=u.to_si(mu_old, "energy"),
        energy_per_atom=u.to_si(energies[-1], "energy"),
        steps=steps,
        imaginary_time=steps * dt_imag,
        residual=residual,
        energies=np.array(energies),
    )
    return state, info
