"""Three-component wavefunction container, observables and SPF1 snapshots."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .units import Grid

#: Component order of the amplitude array.
SPIN_INDICES = (-1, 0, 1)

PHASE_MASK = 1e-6

SPF1_MAGIC = b"SPF1"
SPF1_VERSION = 1
_HEADER = struct.Struct("<4sIQdddd")


def component(m: int) -> int:
    """Row of spin projection ``m`` in the amplitude array."""
    try:
        return SPIN_INDICES.index(m)
    except ValueError:
        raise ValueError(f"spin index must be one of {SPIN_INDICES}, got {m!r}") from None


@dataclass
class SpinorField:
    """psi_m(z) on a grid, SI units (m^-1/2) with sum_m int |psi_m|^2 dz <= 1."""

    grid: Grid
    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (3, self.grid.num_points):
            raise ValueError(
                f"amplitudes must have shape (3, {self.grid.num_points}), "
                f"got {self.amplitudes.shape}")

    @classmethod
    def from_component(cls, grid, psi, m=-1, time=0.0):
        amps = np.zeros((3, grid.num_points), dtype=complex)
        amps[component(m)] = psi
        return cls(grid, amps, time)

    def copy(self) -> SpinorField:
        return replace(self, amplitudes=self.amplitudes.copy())

    def component_densities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def total_density(self) -> np.ndarray:
        return self.component_densities().sum(axis=0)

    def component_norms(self) -> np.ndarray:
        return self.component_densities().sum(axis=1) * self.grid.dz

    def norm(self) -> float:
        return float(self.component_norms().sum())


@dataclass(frozen=True)
class Observables:
    component_norms: np.ndarray
    total_density: np.ndarray
    component_densities: np.ndarray
    phase: np.ma.MaskedArray
    local_transfer_fraction: np.ma.MaskedArray = field(repr=False)


def unwrapped_phase(psi, density, threshold=PHASE_MASK):
    """Phase of ``psi`` unwrapped left to right over points above threshold.

    Masked points are skipped, so a jump across a density zero is carried to
    the next unmasked point and reduced to (-pi, pi] there.
    """
    keep = density > threshold * density.max() if density.max() > 0 else np.zeros(density.shape, bool)
    phase = np.zeros(psi.shape)
    if keep.any():
        phase[keep] = np.unwrap(np.angle(psi[keep]))
    return np.ma.array(phase, mask=~keep)


def observables(state: SpinorField, phase_component: int = -1) -> Observables:
    dens = state.component_densities()
    total = dens.sum(axis=0)
    psi = state.amplitudes[component(phase_component)]
    phase = unwrapped_phase(psi, dens[component(phase_component)])
    keep = total > PHASE_MASK * total.max() if total.max() > 0 else np.zeros(total.shape, bool)
    frac = np.zeros_like(total)
    frac[keep] = 1.0 - dens[component(-1)][keep] / total[keep]
    return Observables(
        component_norms=dens.sum(axis=1) * state.grid.dz,
        total_density=total,
        component_densities=dens,
        phase=phase,
        local_transfer_fraction=np.ma.array(frac, mask=~keep),
    )


def project(state: SpinorField, keep) -> SpinorField:
    """Zero the components not in ``keep``; the norm is not restored."""
    keep = set(keep)
    if not keep:
        raise ValueError("keep must name at least one spin component")
    out = state.copy()
    for m in SPIN_INDICES:
        if m not in keep:
            out.amplitudes[component(m)] = 0
    for m in keep:
        component(m)
    return out


def write_spf1(state: SpinorField, path) -> Path:
    path = Path(path)
    grid = state.grid
    header = _HEADER.pack(SPF1_MAGIC, SPF1_VERSION, grid.num_points, grid.z_min,
                          grid.dz, state.time, state.norm())
    body = np.ascontiguousarray(state.amplitudes, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body.tobytes())
    return path


def read_spf1(path) -> SpinorField:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated SPF1 header")
    magic, version, n, z_min, dz, time, _norm = _HEADER.unpack_from(data)
    if magic != SPF1_MAGIC:
        raise ValueError(f"{path}: not an SPF1 file")
    if version != SPF1_VERSION:
        raise ValueError(f"{path}: unsupported SPF1 version {version}")
    expected = _HEADER.size + 3 * n * 16
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(data)}")
    amps = np.frombuffer(data, dtype="<c16", offset=_HEADER.size).reshape(3, n).astype(complex)
    grid = Grid(int(n), z_min, z_min + n * dz)
    return SpinorField(grid, amps, time)
