"""Hyperbolic-secant adiabatic pulses and slice geometry.

An HS pulse has Rabi frequency Omega0 sech(beta (t - t_p/2)) and detuning
Delta0 tanh(beta (t - t_p/2)) + Delta1.  It is parametrised by

    mu    = Delta0 / Omega0            (normalised bandwidth)
    Gamma = Omega0 / (mu beta)         (adiabaticity)
    alpha = sech(beta t_p / 2)         (truncation)

Slice convention
----------------
``HSPulse.detuning`` is the sweep expressed relative to the gradient
orientation.  The RF offset seen by the atoms is ``-gradient_sign`` times it,
so the resonance sits at

    z_res(t) = -detuning(t) / (gamma |dB/dz|)

whatever the gradient sign.  A positive ``delta1`` therefore centres the
slice at negative z, and a time-reversed pulse sweeps the slice in the
opposite spatial direction.  With the gradient inverted between two pulses,
the second (time-reversed) pulse is the spatial mirror in time of the first
and cancels both its gradient phase and its Stern-Gerlach impulse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import ControlSegment
from .errors import NumericalError, ValidationError
from .spin import rotate
from .units import PhysicalConstants

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class HSPulse:
    omega0: float
    mu: float
    gamma: float
    alpha: float
    delta1: float = 0.0
    gradient_sign: int = -1
    time_reversed: bool = False
    gradient: float = math.nan  # |dB/dz| in G/cm

    def __post_init__(self):
        if not (self.omega0 > 0 and self.mu > 0 and self.gamma > 0):
            raise ValidationError("omega0, mu and Gamma must be positive")
        if not 0 < self.alpha < 1:
            raise ValidationError("alpha must lie in (0, 1)")
        if self.gradient_sign not in (-1, 1):
            raise ValidationError("gradient_sign must be +1 or -1")
        if not (math.isnan(self.gradient) or self.gradient > 0):
            raise ValidationError("gradient magnitude must be positive")

    @property
    def delta0(self) -> float:
        return self.mu * self.omega0

    @property
    def beta(self) -> float:
        return self.omega0 / (self.mu * self.gamma)

    @property
    def duration(self) -> float:
        return 2.0 / self.beta * math.acosh(1.0 / self.alpha)

    @property
    def signed_gradient(self) -> float:
        return self.gradient_sign * self.gradient

    def rabi(self, t):
        return self.omega0 / np.cosh(self.beta * (np.asarray(t) - 0.5 * self.duration))

    def detuning(self, t):
        sweep = -1.0 if self.time_reversed else 1.0
        x = self.beta * (np.asarray(t) - 0.5 * self.duration)
        return sweep * self.delta0 * np.tanh(x) + self.delta1

    def rf_offset(self, t):
        """Physical detuning Delta(t) entering delta(z, t) = Delta - gamma B' z."""
        return -self.gradient_sign * self.detuning(t)

    def reversed(self, gradient_sign=None) -> HSPulse:
        """Time-reversed copy, by default with the gradient inverted."""
        sign = -self.gradient_sign if gradient_sign is None else gradient_sign
        return replace(self, time_reversed=not self.time_reversed, gradient_sign=sign)

    def dimensionless(self):
        """(mu, Gamma, alpha) recomputed from (Delta0, beta, t_p)."""
        return dimensionless_from_physical(self.omega0, self.delta0, self.beta, self.duration)

    def slice_geometry(self, constants: PhysicalConstants = PhysicalConstants()):
        return predicted_slice(self, constants)

    def segment(self, constants: PhysicalConstants | None = None) -> ControlSegment:
        if math.isnan(self.gradient):
            raise ValidationError("pulse has no gradient set")
        return ControlSegment(self.duration, rabi=self.rabi, detuning=self.rf_offset,
                              gradient=self.signed_gradient,
                              label="pulse (reversed)" if self.time_reversed else "pulse")


@dataclass(frozen=True)
class SliceGeometry:
    thickness: float
    center: float
    sharpness: float = math.nan

    @property
    def resolution(self) -> float:
        return self.thickness / self.sharpness

    @property
    def edges(self):
        return self.center - 0.5 * self.thickness, self.center + 0.5 * self.thickness


def dimensionless_from_physical(omega0, delta0, beta, duration):
    mu = delta0 / omega0
    gamma = omega0 / (mu * beta)
    alpha = 1.0 / math.cosh(0.5 * beta * duration)
    return mu, gamma, alpha


def gradient_for_slice(delta0: float, thickness: float,
                       gamma: float = PhysicalConstants().gyromagnetic_ratio) -> float:
    """dB/dz in G/cm addressing a slice of ``thickness`` metres."""
    if not (delta0 > 0 and thickness > 0 and gamma > 0):
        raise ValidationError("delta0, thickness and gamma must be positive")
    return 2 * delta0 / (gamma * thickness) / 100.0


def slice_for_gradient(delta0: float, gradient: float,
                       gamma: float = PhysicalConstants().gyromagnetic_ratio) -> float:
    """Slice thickness in metres for a gradient in G/cm."""
    return 2 * delta0 / (gamma * gradient * 100.0)


def pulse_from_dimensionless(omega0, mu, gamma, alpha, delta1=0.0, gradient_sign=-1,
                             slice_thickness=None, gradient=None, time_reversed=False,
                             constants: PhysicalConstants = PhysicalConstants()) -> HSPulse:
    """Build an :class:`HSPulse`; give either a target slice thickness (m)
    or the gradient magnitude (G/cm)."""
    if slice_thickness is not None and gradient is not None:
        raise ValidationError("give slice_thickness or gradient, not both")
    pulse = HSPulse(omega0, mu, gamma, alpha, delta1, gradient_sign, time_reversed)
    if slice_thickness is not None:
        gradient = gradient_for_slice(pulse.delta0, slice_thickness, constants.gyromagnetic_ratio)
    if gradient is not None:
        pulse = replace(pulse, gradient=abs(gradient))
    return pulse


def predicted_slice(pulse: HSPulse, constants=PhysicalConstants()) -> SliceGeometry:
    gamma = constants.gyromagnetic_ratio
    g = pulse.gradient * 100.0
    return SliceGeometry(thickness=2 * pulse.delta0 / (gamma * g),
                         center=-pulse.delta1 / (gamma * g))


def sample_waveform(pulse: HSPulse, t):
    """(Omega(t), Delta(t)) in rad/s for 0 <= t <= t_p."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > pulse.duration * (1 + 1e-12)):
        raise ValueError("t must lie within [0, t_p]")
    return pulse.rabi(t), pulse.detuning(t)


def point_populations(pulse: HSPulse, point_detuning=0.0, n_steps=200_000, psi0=None):
    """Populations (m = -1, 0, +1) after the pulse at one or many points.

    ``point_detuning`` is the static offset from the slice centre in rad/s,
    i.e. gamma |dB/dz| (z - z_c); the local detuning is
    (detuning(t) - delta1) + point_detuning.  Uses the same closed-form
    rotation as the field propagator with midpoint sampling.
    """
    offsets = np.atleast_1d(np.asarray(point_detuning, dtype=float))
    psi = np.zeros((3, offsets.size), dtype=complex)
    if psi0 is None:
        psi[0] = 1.0
    else:
        psi[:] = np.asarray(psi0, dtype=complex)[:, None]
    if pulse.duration > 0:
        dt = pulse.duration / n_steps
        t = (np.arange(n_steps) + 0.5) * dt
        omega = pulse.rabi(t)
        sweep = pulse.detuning(t) - pulse.delta1
        for i in range(n_steps):
            psi = rotate(psi, omega[i], sweep[i] + offsets, dt)
    if not np.all(np.isfinite(psi)):
        raise NumericalError("point propagation failed", point_detuning=point_detuning)
    pops = np.abs(psi) ** 2
    return pops[:, 0] if np.ndim(point_detuning) == 0 else pops


def single_pulse_fidelity(pulse: HSPulse, point_detuning: float = 0.0, n_steps=200_000) -> float:
    """Transfer from m = -1 to m = +1 at one point; at the slice centre
    (``point_detuning = 0``) this is the pulse fidelity."""
    return float(point_populations(pulse, point_detuning, n_steps)[2])


def transfer_profile(pulse: HSPulse, z, constants=PhysicalConstants(), n_steps=50_000,
                     quantity="spin"):
    """Transfer after the pulse at positions ``z`` (m), atoms held still.

    ``quantity`` as in :func:`mrcsim.analysis.measure_slice_sharpness`:
    ``"spin"`` is (P+ - P- + 1)/2, ``"fraction"`` is 1 - P- and ``"upper"``
    is P+.
    """
    geom = predicted_slice(pulse, constants)
    offsets = constants.gyromagnetic_ratio * pulse.gradient * 100.0 * (np.asarray(z) - geom.center)
    pops = point_populations(pulse, offsets, n_steps)
    if quantity == "spin":
        return 0.5 * (pops[2] - pops[0] + 1.0)
    if quantity == "fraction":
        return 1.0 - pops[0]
    if quantity == "upper":
        return pops[2]
    raise ValueError(f"unknown transfer quantity {quantity!r}")


def point_sharpness(pulse: HSPulse, constants=PhysicalConstants(), n_steps=50_000, samples=321,
                    quantity="spin"):
    """10%-90% rise distance (m) of the point-model transfer at the inner
    slice edge, i.e. the edge nearer z = 0."""
    from .analysis import rise_distance

    geom = predicted_slice(pulse, constants)
    lo, hi = geom.edges
    edge = hi if abs(hi) <= abs(lo) else lo
    width = 8 * pulse.beta / (constants.gyromagnetic_ratio * pulse.gradient * 100.0)
    z = np.linspace(edge - width, edge + width, samples)
    return rise_distance(z, transfer_profile(pulse, z, constants, n_steps, quantity))


def scan_mu(base: HSPulse, mus, constants=PhysicalConstants(), n_steps=50_000, hold="beta"):
    """Rows (mu, Gamma, t_p, predicted slice, fidelity) for a scan over mu.

    With ``hold="beta"`` Gamma is rescaled so mu * Gamma, hence beta, t_p and
    the edge sharpness, stay fixed; ``hold="gamma"`` keeps Gamma.
    """
    rows = []
    product = base.mu * base.gamma
    for mu in mus:
        gamma = product / mu if hold == "beta" else base.gamma
        p = replace(base, mu=float(mu), gamma=float(gamma))
        rows.append((p.mu, p.gamma, p.duration, predicted_slice(p, constants).thickness,
                     single_pulse_fidelity(p, 0.0, n_steps)))
    return rows
