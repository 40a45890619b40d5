"""Split-step propagation of the spin-1 quasi-1D Gross-Pitaevskii equation.

One Strang step is

    half kinetic -> trap + mean-field phase -> spin rotation -> half kinetic

with the spin rotation exp(-i [delta(z, t) F_z + Omega(t) F_x] dt) evaluated
in closed form at the midpoint time.  The local detuning is

    delta(z, t) = Delta(t) - gamma B'(t) z,

so with B' < 0 the m = +1 component is pushed towards negative z.
Consecutive half kinetic steps are fused; the result is algebraically the
same sequence of Strang steps.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
import scipy.fft as sfft

from . import _kernels
from .errors import NumericalError
from .interactions import Nonlinearity
from .spin import rotate, spin_density
from .spinor import SpinorField
from .units import CondensateParams, Grid, PhysicalConstants, UnitSystem

log = logging.getLogger(__name__)

#: G/m per G/cm
GAUSS_PER_CM = 100.0


def fft_workers() -> int:
    """Thread cap for the FFTs, from ``MRC_SIM_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("MRC_SIM_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class StepperConfig:
    dt_pulse: float = 2e-9
    dt_free: float = 1e-6
    max_rotation: float = 0.2

    def __post_init__(self):
        if not (self.dt_pulse > 0 and self.dt_free > 0):
            raise ValueError("time steps must be positive")


@dataclass(frozen=True)
class ControlSegment:
    """An interval of spatially uniform control fields.

    ``rabi`` and ``detuning`` map the time since the start of the segment (s,
    array) to rad/s; ``detuning`` is the physical RF offset Delta(t).
    ``gradient`` is dB/dz in G/cm, constant over the segment.  ``fine``
    asks for the pulse time step even without coupling.
    """

    duration: float
    rabi: Callable[[np.ndarray], np.ndarray] | None = None
    detuning: Callable[[np.ndarray], np.ndarray] | float = 0.0
    gradient: float = 0.0
    label: str = ""
    fine: bool = False

    @property
    def coupled(self) -> bool:
        return self.rabi is not None

    def detuning_at(self, t):
        if callable(self.detuning):
            return self.detuning(t)
        return np.full(np.shape(t), float(self.detuning))


@dataclass(frozen=True)
class Projection:
    keep: frozenset = frozenset({-1})
    label: str = "project"
    duration: float = 0.0


@dataclass
class HamiltonianTerms:
    """Static pieces of the Hamiltonian on one grid, in internal units."""

    grid: Grid
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    params: CondensateParams = field(default_factory=CondensateParams)
    nonlinearity: Nonlinearity | None = None

    def __post_init__(self):
        if self.nonlinearity is None:
            self.nonlinearity = Nonlinearity(self.constants, self.params)
        self.units = UnitSystem(self.constants)
        u = self.units
        self.z = u.to_internal(self.grid.z, "length")
        self.dz = u.to_internal(self.grid.dz, "length")
        self.k = u.to_internal(self.grid.wavenumbers, "wavenumber")
        self.kinetic = 0.5 * self.k**2
        w_z = u.to_internal(self.params.omega_z, "rate")
        self.trap = 0.5 * w_z**2 * self.z**2
        self.nl = self.nonlinearity.internal(u)
        # rate per (G/cm) per internal length
        self.gamma_gradient = u.to_internal(
            self.constants.gyromagnetic_ratio * GAUSS_PER_CM * self.units.length, "rate")

    # conversion helpers
    def to_internal(self, state: SpinorField) -> np.ndarray:
        return state.amplitudes * math.sqrt(self.units.length)

    def to_state(self, psi, time) -> SpinorField:
        return SpinorField(self.grid, psi / math.sqrt(self.units.length), time)

    # observables in internal units (energy per particle etc.)
    def kinetic_energy(self, psi):
        psik = sfft.fft(psi, axis=-1, workers=fft_workers())
        return float(np.sum(self.kinetic * np.abs(psik) ** 2) * self.dz / psi.shape[-1])

    def momentum(self, psi):
        psik = sfft.fft(psi, axis=-1, workers=fft_workers())
        return float(np.sum(self.k * np.abs(psik) ** 2) * self.dz / psi.shape[-1])

    def energy(self, psi):
        rho = np.sum(np.abs(psi) ** 2, axis=0)
        return (self.kinetic_energy(psi) + float(np.sum(self.trap * rho) * self.dz)
                + float(np.sum(self.nl.energy(rho)) * self.dz))

    def chemical_potential(self, psi):
        rho = np.sum(np.abs(psi) ** 2, axis=0)
        norm = float(np.sum(rho) * self.dz)
        mean = (self.kinetic_energy(psi) + float(np.sum((self.trap + self.nl.potential(rho)) * rho)) * self.dz)
        return mean / norm

    def norm(self, psi):
        return float(np.sum(np.abs(psi) ** 2) * self.dz)

    def local_detuning(self, detuning, gradient):
        """delta(z) in internal rate units for a physical offset (rad/s) and G/cm."""
        return (self.units.to_internal(detuning, "rate")
                - self.gamma_gradient * gradient * self.z)


class Propagator:
    """Owns the kinetic factors for one time step on one Hamiltonian."""

    def __init__(self, terms: HamiltonianTerms, dt):
        self.terms = terms
        self.dt = dt
        k = terms.kinetic
        self.kin_half = np.exp(-0.5j * k * dt)
        self.kin_full = self.kin_half**2

    def _local_phase(self, psi, extra=0.0):
        t = self.terms
        rho = np.sum(np.abs(psi) ** 2, axis=0)
        v = t.trap + extra
        if t.nl.active:
            v = v + t.nl.potential(rho)
        return np.exp(-1j * v * self.dt), rho

    def run(self, psi, n_steps, rabi=None, delta0=None, delta_slope=0.0, active=None,
            renormalize=False):
        """Advance ``psi`` by ``n_steps`` Strang steps.

        ``rabi`` and ``delta0`` are per-step arrays of Omega and Delta at
        the step midpoints (internal units); ``delta_slope`` is gamma B' so
        that delta(z) = Delta - delta_slope z.  ``active`` restricts the
        update to a subset of rows when the others are known to stay zero.
        ``renormalize`` restores unit norm after every step (imaginary time).
        """
        t = self.terms
        if n_steps == 0:
            return psi
        rows = slice(None) if active is None else list(active)
        work = np.ascontiguousarray(psi[rows])
        m_values = np.array([-1.0, 0.0, 1.0])[rows]
        coupled = rabi is not None
        if delta0 is None:
            delta0 = np.zeros(n_steps)
        compiled = np.isrealobj(self.dt) and not t.nl.spin_ratio
        nl = (t.nl.w_r, t.nl.offset, t.nl.kappa, t.nl.cubic)

        workers = fft_workers()
        work = sfft.ifft(sfft.fft(work, axis=-1, workers=workers) * self.kin_half, axis=-1,
                         workers=workers)
        for i in range(n_steps):
            if compiled:
                if coupled:
                    _kernels.coupled_local(work, t.trap, t.z, self.dt, rabi[i], delta0[i],
                                           delta_slope, *nl)
                else:
                    _kernels.diagonal_local(work, m_values, t.trap, t.z, self.dt, delta0[i],
                                            delta_slope, *nl)
            else:
                work = self._local_numpy(work, m_values, rabi[i] if coupled else None,
                                         delta0[i], delta_slope)
            if renormalize:
                work /= math.sqrt(t.norm(work))
            kin = self.kin_half if i == n_steps - 1 else self.kin_full
            work = sfft.ifft(sfft.fft(work, axis=-1, workers=workers) * kin, axis=-1,
                             workers=workers)
        if not np.all(np.isfinite(work)):
            raise NumericalError("non-finite amplitudes during propagation",
                                 steps=n_steps, dt=self.dt)
        if renormalize:
            work /= math.sqrt(t.norm(work))
        if active is None:
            return work
        out = psi.copy()
        out[rows] = work
        return out

    def _local_numpy(self, work, m_values, rabi, d0, slope):
        t = self.terms
        phase, rho = self._local_phase(work)
        work = work * phase
        delta = d0 - slope * t.z if (slope or rabi is not None) else d0
        spin = t.nl.spin_coupling(rho) if t.nl.spin_ratio else None
        if rabi is None and spin is None:
            if np.any(delta):
                work = work * np.exp(-1j * self.dt * m_values[:, None] * delta)
            return work
        hx, hz, hy = (rabi or 0.0), delta, None
        if spin is not None:
            fx, fy, fz = spin_density(work)
            hx = hx + spin * fx
            hy = spin * fy
            hz = hz + spin * fz
        return rotate(work, hx, hz, self.dt, hy=hy)


def step_real(state: SpinorField, terms: HamiltonianTerms, dt: float,
              rabi: float = 0.0, detuning: float = 0.0, gradient: float = 0.0) -> SpinorField:
    """One Strang step of ``dt`` seconds with control fields frozen at the
    midpoint values given (rad/s, rad/s, G/cm)."""
    u = terms.units
    prop = Propagator(terms, u.to_internal(dt, "time"))
    psi = terms.to_internal(state)
    psi = prop.run(psi, 1,
                   rabi=np.array([u.to_internal(rabi, "rate")]) if rabi else None,
                   delta0=np.array([u.to_internal(detuning, "rate")]),
                   delta_slope=terms.gamma_gradient * gradient)
    return terms.to_state(psi, state.time + dt)


def _stage_steps(duration, dt):
    return max(1, math.ceil(duration / dt - 1e-9))


def _as_segment(stage, constants):
    if isinstance(stage, (ControlSegment, Projection)):
        return stage
    return stage.segment(constants)


def evolve(state: SpinorField, terms: HamiltonianTerms, stages: Iterable,
           snapshot_every: float | None = None,
           config: StepperConfig = StepperConfig(),
           on_snapshot: Callable[[SpinorField], None] | None = None,
           keep_snapshots: bool = True) -> list[SpinorField]:
    """Run ``stages`` in order and return snapshots.

    The initial state, every stage boundary and every multiple of
    ``snapshot_every`` (measured from the initial time) are captured.
    Stages are :class:`ControlSegment`, :class:`Projection` or objects with a
    ``segment(constants)`` method.
    """
    u = terms.units
    snapshots = []

    def emit(psi, time):
        snap = terms.to_state(psi.copy(), time)
        if on_snapshot is not None:
            on_snapshot(snap)
        if keep_snapshots:
            snapshots.append(snap)

    psi = terms.to_internal(state)
    t0 = state.time
    time = t0
    emit(psi, time)
    cadence = snapshot_every if snapshot_every else math.inf
    next_snap = t0 + cadence

    for stage in stages:
        seg = _as_segment(stage, terms.constants)
        if isinstance(seg, Projection):
            rows = [i for i, m in enumerate((-1, 0, 1)) if m not in seg.keep]
            psi = psi.copy()
            psi[rows] = 0
            emit(psi, time)
            continue
        if seg.duration == 0:
            emit(psi, time)
            continue
        dt_target = config.dt_pulse if (seg.coupled or seg.fine) else config.dt_free
        n = _stage_steps(seg.duration, dt_target)
        dt = seg.duration / n
        prop = Propagator(terms, u.to_internal(dt, "time"))
        slope = terms.gamma_gradient * seg.gradient
        local_t = (np.arange(n) + 0.5) * dt
        rabi = u.to_internal(seg.rabi(local_t), "rate") if seg.coupled else None
        delta0 = u.to_internal(seg.detuning_at(local_t), "rate")
        active = None
        if not seg.coupled and not terms.nl.spin_ratio:
            nonzero = [i for i in range(3) if np.any(psi[i])]
            active = nonzero if len(nonzero) < 3 else None
        log.debug("stage %s: %d steps of %.3g s", seg.label, n, dt)

        start = time
        done = 0
        while done < n:
            # next snapshot inside this stage, rounded to a step boundary
            target = (next_snap - start) / dt
            chunk = n - done if target >= n - 0.5 else max(1, round(target) - done)
            sl = slice(done, done + chunk)
            psi = prop.run(psi, chunk,
                           rabi=None if rabi is None else rabi[sl],
                           delta0=delta0[sl], delta_slope=slope, active=active)
            done += chunk
            time = start + done * dt
            if done < n:
                emit(psi, time)
                while next_snap <= time + 0.5 * dt:
                    next_snap += cadence
        time = start + seg.duration
        emit(psi, time)
        while next_snap <= time + 0.5 * dt:
            next_snap += cadence
    return snapshots
