"""Physical constants, condensate parameters, derived scales and the grid.

All public quantities are SI, with magnetic fields in gauss and gradients in
G/cm.  The propagators work in an internal unit system where hbar = m = 1 and
lengths are measured in micrometres; :class:`UnitSystem` converts between the
two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
import scipy.constants as sc
from scipy.optimize import brentq

from .errors import ConfigurationError, ResourceError

if TYPE_CHECKING:
    from .interactions import Nonlinearity
    from .spinor import SpinorField

RB87_MASS = 86.909180527 * sc.atomic_mass

#: Magnitude of the F = 1 gyromagnetic ratio of 87Rb used by default, rad s^-1 G^-1.
RB87_GAMMA = 2 * math.pi * 0.70e6


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = sc.hbar
    atom_mass: float = RB87_MASS
    scattering_length: float = 5.3e-9
    gyromagnetic_ratio: float = RB87_GAMMA

    def __post_init__(self):
        for name in ("hbar", "atom_mass", "scattering_length", "gyromagnetic_ratio"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class CondensateParams:
    """Atom number and trap of the quasi-1D condensate.

    ``atom_number = 0`` is accepted and means the non-interacting limit.
    """

    atom_number: float = 1e4
    axial_freq: float = 2.4
    radial_freq: float = 158.4
    spin_f: int = 1

    def __post_init__(self):
        if self.atom_number < 0:
            raise ConfigurationError("atom_number must be non-negative")
        if not (self.axial_freq > 0 and self.radial_freq > 0):
            raise ConfigurationError("trap frequencies must be positive")
        if self.radial_freq <= self.axial_freq:
            raise ConfigurationError("radial_freq must exceed axial_freq (quasi-1D)")
        if self.spin_f != 1:
            raise ConfigurationError("only F = 1 is supported")

    @property
    def omega_z(self) -> float:
        return 2 * math.pi * self.axial_freq

    @property
    def omega_r(self) -> float:
        return 2 * math.pi * self.radial_freq


@dataclass(frozen=True)
class DerivedScales:
    healing_length: float
    sound_speed: float
    healing_time: float
    thomas_fermi_radius: float
    peak_density: float
    chemical_potential: float = math.nan

    @classmethod
    def from_density(cls, peak_density, thomas_fermi_radius, constants,
                     chemical_potential=math.nan):
        """Build the scales from a peak 3D density.

        The sound speed is sqrt(g n / m) with g = 4 pi hbar^2 a / m, which
        is the same as hbar / (sqrt(2) m xi).
        """
        xi = 1.0 / math.sqrt(8 * math.pi * peak_density * constants.scattering_length)
        c = constants.hbar / (math.sqrt(2.0) * constants.atom_mass * xi)
        return cls(
            healing_length=xi,
            sound_speed=c,
            healing_time=xi / c,
            thomas_fermi_radius=thomas_fermi_radius,
            peak_density=peak_density,
            chemical_potential=chemical_potential,
        )


@dataclass(frozen=True)
class UnitSystem:
    """hbar = m = 1 with a micrometre length unit."""

    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    length: float = 1e-6

    @property
    def time(self) -> float:
        return self.constants.atom_mass * self.length**2 / self.constants.hbar

    @property
    def energy(self) -> float:
        return self.constants.hbar / self.time

    def to_internal(self, value, kind: str):
        return value / self._scale(kind)

    def to_si(self, value, kind: str):
        return value * self._scale(kind)

    def _scale(self, kind):
        scales = {
            "length": self.length,
            "time": self.time,
            "rate": 1.0 / self.time,
            "energy": self.energy,
            "wavenumber": 1.0 / self.length,
            "amplitude": self.length**-0.5,
            "density": 1.0 / self.length,
            "velocity": self.length / self.time,
        }
        try:
            return scales[kind]
        except KeyError:
            raise ValueError(f"unknown quantity kind {kind!r}") from None


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid, z_k = z_min + k dz for k < num_points."""

    num_points: int
    z_min: float
    z_max: float

    def __post_init__(self):
        n = self.num_points
        if n < 2 or n & (n - 1):
            raise ConfigurationError("num_points must be a power of two")
        if not self.z_max > self.z_min:
            raise ConfigurationError("z_max must exceed z_min")

    @property
    def dz(self) -> float:
        return (self.z_max - self.z_min) / self.num_points

    @property
    def z(self) -> np.ndarray:
        return self.z_min + self.dz * np.arange(self.num_points)

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.num_points, d=self.dz)

    @classmethod
    def symmetric(cls, num_points, half_width):
        return cls(num_points, -half_width, half_width)


def thomas_fermi_chemical_potential(constants, params, nonlinearity) -> float:
    """Chemical potential (J) of the Thomas-Fermi profile holding N atoms."""
    if params.atom_number == 0:
        return 0.0
    m, wz = constants.atom_mass, params.omega_z

    def excess(mu):
        radius = math.sqrt(2 * mu / (m * wz**2))
        u = np.linspace(-1.0, 1.0, 4001)
        n1 = nonlinearity.density_for_potential(mu * (1 - u**2))
        return radius * np.trapezoid(n1, u) - params.atom_number

    hi = constants.hbar * params.omega_r
    while excess(hi) < 0:
        hi *= 2
    return brentq(excess, 0.0, hi, xtol=1e-40, rtol=1e-14)


def derive_scales(constants: PhysicalConstants, params: CondensateParams,
                  ground_state: SpinorField | None = None,
                  nonlinearity: Nonlinearity | None = None,
                  analytic_fallback: bool = True) -> DerivedScales:
    """Healing length, sound speed, healing time and Thomas-Fermi radius.

    With ``ground_state`` the peak density and radius are measured from the
    solved profile; otherwise the analytic Thomas-Fermi solution of the same
    nonlinearity model is used.
    """
    from .interactions import Nonlinearity

    nl = nonlinearity or Nonlinearity(constants, params)
    if params.atom_number == 0:
        raise ConfigurationError("healing length is undefined for N = 0 (linear regime)")
    if ground_state is not None:
        from .analysis import fit_thomas_fermi_radius

        n1 = params.atom_number * ground_state.total_density()
        n1_peak = float(n1.max())
        radius = fit_thomas_fermi_radius(ground_state.grid.z, n1, nl)
        mu = float(nl.potential(n1_peak))
        return DerivedScales.from_density(nl.peak_density_3d(n1_peak), radius, constants, mu)
    if not analytic_fallback:
        raise ConfigurationError("no ground state given and analytic fallback disabled")
    mu = thomas_fermi_chemical_potential(constants, params, nl)
    radius = math.sqrt(2 * mu / (constants.atom_mass * params.omega_z**2))
    n1_peak = float(nl.density_for_potential(mu))
    return DerivedScales.from_density(nl.peak_density_3d(n1_peak), radius, constants, mu)


def make_grid(scales: DerivedScales, points_per_xi: float = 4.0,
              padding: float = 1.4, max_points: int = 2**18) -> Grid:
    """Smallest power-of-two symmetric grid with dz <= xi / points_per_xi
    spanning +-padding * z_TF."""
    if points_per_xi < 4:
        raise ConfigurationError("points_per_xi must be >= 4")
    if padding < 1.4:
        raise ConfigurationError("padding must be >= 1.4")
    half_width = padding * scales.thomas_fermi_radius
    needed = 2 * half_width * points_per_xi / scales.healing_length
    n = 1 << max(1, math.ceil(math.log2(needed)))
    if n > max_points:
        raise ResourceError(f"grid needs {n} points, cap is {max_points}")
    return Grid.symmetric(n, half_width)
