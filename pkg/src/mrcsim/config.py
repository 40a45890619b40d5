"""Flat ``key = value`` run configuration.

Required keys: atoms, f_z_hz, f_r_hz, scattering_length_nm,
gamma_mhz_per_gauss, grid_points_per_xi, grid_padding.  Optional keys
tune the model and the stepper; their defaults are listed in ``OPTIONAL``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .dynamics import StepperConfig
from .errors import ConfigurationError
from .interactions import Nonlinearity
from .units import CondensateParams, PhysicalConstants

REQUIRED = ("atoms", "f_z_hz", "f_r_hz", "scattering_length_nm", "gamma_mhz_per_gauss",
            "grid_points_per_xi", "grid_padding")

OPTIONAL = {
    "nonlinearity": "effective-1d",
    "transverse_offset": "0",
    "dt_pulse_ns": "2",
    "dt_free_us": "1",
    "ground_tolerance": "1e-8",
    "max_grid_points": str(2**18),
}


@dataclass(frozen=True)
class RunConfig:
    constants: PhysicalConstants
    params: CondensateParams
    points_per_xi: float
    padding: float
    nonlinearity_model: str = "effective-1d"
    transverse_offset: float = 0.0
    stepper: StepperConfig = StepperConfig()
    ground_tolerance: float = 1e-8
    max_grid_points: int = 2**18

    def nonlinearity(self) -> Nonlinearity:
        return Nonlinearity(self.constants, self.params, model=self.nonlinearity_model,
                            transverse_offset=self.transverse_offset)

    def as_dict(self) -> dict:
        """All resolved parameters in SI units."""
        c, p = self.constants, self.params
        return {
            "hbar_Js": c.hbar, "atom_mass_kg": c.atom_mass,
            "scattering_length_m": c.scattering_length,
            "gyromagnetic_ratio_rad_per_s_per_G": c.gyromagnetic_ratio,
            "atoms": p.atom_number, "f_z_hz": p.axial_freq, "f_r_hz": p.radial_freq,
            "grid_points_per_xi": self.points_per_xi, "grid_padding": self.padding,
            "nonlinearity": self.nonlinearity_model,
            "transverse_offset": self.transverse_offset,
            "dt_pulse_s": self.stepper.dt_pulse, "dt_free_s": self.stepper.dt_free,
            "ground_tolerance_per_ms": self.ground_tolerance,
            "max_grid_points": self.max_grid_points,
        }


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in REQUIRED and key not in OPTIONAL:
            raise ConfigurationError(f"{source}:{lineno}: unknown key '{key}'")
        if key in values:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key '{key}'")
        values[key] = value
    for key in REQUIRED:
        if key not in values:
            raise ConfigurationError(f"{source}: missing required key '{key}'")
    merged = {**OPTIONAL, **values}

    def num(key):
        try:
            x = float(merged[key])
        except ValueError:
            raise ConfigurationError(f"{source}: key '{key}' is not a number") from None
        if not math.isfinite(x):
            raise ConfigurationError(f"{source}: key '{key}' must be finite")
        return x

    atoms = num("atoms")
    if atoms < 0 or not atoms.is_integer():
        raise ConfigurationError(f"{source}: 'atoms' must be a non-negative integer")
    try:
        constants = PhysicalConstants(
            scattering_length=num("scattering_length_nm") * 1e-9,
            gyromagnetic_ratio=2 * math.pi * 1e6 * num("gamma_mhz_per_gauss"))
        params = CondensateParams(atom_number=int(atoms), axial_freq=num("f_z_hz"),
                                  radial_freq=num("f_r_hz"))
        stepper = StepperConfig(dt_pulse=num("dt_pulse_ns") * 1e-9,
                                dt_free=num("dt_free_us") * 1e-6)
    except ValueError as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    model = merged["nonlinearity"]
    if model not in ("effective-1d", "plain-cubic"):
        raise ConfigurationError(f"{source}: nonlinearity must be 'effective-1d' or 'plain-cubic'")
    ppx, pad = num("grid_points_per_xi"), num("grid_padding")
    if ppx < 4:
        raise ConfigurationError(f"{source}: grid_points_per_xi must be at least 4")
    if pad < 1.4:
        raise ConfigurationError(f"{source}: grid_padding must be at least 1.4")
    tol = num("ground_tolerance")
    if tol <= 0:
        raise ConfigurationError(f"{source}: ground_tolerance must be positive")
    return RunConfig(constants, params, ppx, pad, model, num("transverse_offset"), stepper,
                     tol, int(num("max_grid_points")))


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
