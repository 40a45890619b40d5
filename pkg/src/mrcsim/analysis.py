"""Slice geometry, phase steps, soliton detection/tracking and sound.

Everything here works on :class:`~mrcsim.spinor.SpinorField` snapshots so a
run can be re-analysed without re-simulating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .errors import MeasurementError
from .spinor import PHASE_MASK, SpinorField, component, observables, unwrapped_phase

DEPTH_THRESHOLD = 0.5


def fit_thomas_fermi_radius(z, n1, nonlinearity, threshold=0.005):
    """Thomas-Fermi radius fitted to a linear density profile.

    The fit covers the points whose density exceeds ``threshold`` times the
    peak; the outermost such point seeds the radius.
    """
    z = np.asarray(z)
    n1 = np.asarray(n1)
    above = np.nonzero(n1 > threshold * n1.max())[0]
    r0 = max(abs(z[above[0]]), abs(z[above[-1]]))
    sel = np.abs(z) <= r0
    u0 = float(nonlinearity.potential(n1.max()))

    def model(zz, u, r):
        return nonlinearity.density_for_potential(u * (1 - (zz / r) ** 2))

    scale = n1.max()
    (u_fit, r_fit), _ = curve_fit(lambda zz, u, r: model(zz, u * u0, r * r0) / scale,
                                  z[sel], n1[sel] / scale, p0=(1.0, 1.0))
    return abs(r_fit) * r0


def rise_distance(z, fraction, low=0.1, high=0.9):
    """Distance between the ``low`` and ``high`` crossings of a monotone-ish
    edge, with linear interpolation between samples."""
    z = np.asarray(z, dtype=float)
    f = np.asarray(fraction, dtype=float)
    return abs(_crossing(z, f, high) - _crossing(z, f, low))


def _crossing(z, f, level):
    # crossing nearest to the steepest part of the edge
    s = np.sign(f - level)
    idx = np.nonzero(s[:-1] * s[1:] <= 0)[0]
    idx = idx[(f[idx] != f[idx + 1])]
    if idx.size == 0:
        raise MeasurementError(f"profile never crosses {level}")
    slope = np.abs(np.gradient(f, z))
    i = idx[np.argmax(slope[idx] + slope[idx + 1])]
    return z[i] + (level - f[i]) * (z[i + 1] - z[i]) / (f[i + 1] - f[i])


def local_spin_projection(state: SpinorField, threshold=PHASE_MASK):
    """(<F_z>/(F n) + 1)/2 pointwise: 0 for pure m = -1, 1 for pure m = +1.

    Masked where the total density is below ``threshold`` times its peak.
    """
    dens = state.component_densities()
    total = dens.sum(axis=0)
    keep = total > threshold * total.max() if total.max() > 0 else np.zeros(total.shape, bool)
    out = np.zeros_like(total)
    fz = dens[component(1)] - dens[component(-1)]
    out[keep] = 0.5 * (fz[keep] / total[keep] + 1.0)
    return np.ma.array(out, mask=~keep)


@dataclass(frozen=True)
class TransferProfile:
    z: np.ndarray
    fraction: np.ndarray
    low_crossing: float
    high_crossing: float


@dataclass(frozen=True)
class SliceMeasurement:
    """Measured slice sharpness next to the designed thickness.

    ``sharpness`` is nan (and ``available`` False) when the inner edge does
    not lie inside the condensate.
    """

    sharpness: float
    thickness: float
    profile: TransferProfile | None = field(default=None, repr=False)

    @property
    def available(self) -> bool:
        return not math.isnan(self.sharpness)

    @property
    def resolution(self) -> float:
        return self.thickness / self.sharpness


def measure_slice_sharpness(state: SpinorField, pulse, constants=None, quantity="spin",
                            window=None) -> SliceMeasurement:
    """10%-90% rise distance of the transfer on the inner slice edge.

    ``state`` is the field right after the first pulse.  ``quantity`` picks
    the transfer measure: ``"spin"`` is the local spin projection rescaled to
    [0, 1], ``"fraction"`` is 1 - n_{-1}/n and ``"upper"`` is n_{+1}/n.  The
    edge nearer z = 0 is used, within ``window`` metres of its design
    position (default 8 beta / (gamma |dB/dz|)).
    """
    from .pulses import predicted_slice
    from .units import PhysicalConstants

    constants = constants or PhysicalConstants()
    geom = predicted_slice(pulse, constants)
    lo, hi = geom.edges
    edge = hi if abs(hi) <= abs(lo) else lo
    if window is None:
        window = 8 * pulse.beta / (constants.gyromagnetic_ratio * pulse.gradient * 100.0)

    if quantity == "spin":
        frac = local_spin_projection(state)
    elif quantity == "fraction":
        frac = observables(state).local_transfer_fraction
    elif quantity == "upper":
        dens = state.component_densities()
        total = dens.sum(axis=0)
        frac = np.ma.masked_where(total <= PHASE_MASK * total.max(),
                                  dens[component(1)] / np.where(total > 0, total, 1.0))
    else:
        raise ValueError(f"unknown transfer quantity {quantity!r}")

    z = state.grid.z
    sel = np.abs(z - edge) <= window
    if not sel.any() or np.ma.getmaskarray(frac)[sel].any():
        return SliceMeasurement(math.nan, geom.thickness)
    zs = z[sel]
    fs = np.ma.getdata(frac)[sel]
    try:
        z_lo = _crossing(zs, fs, 0.1)
        z_hi = _crossing(zs, fs, 0.9)
    except MeasurementError:
        return SliceMeasurement(math.nan, geom.thickness)
    profile = TransferProfile(zs, fs, z_lo, z_hi)
    return SliceMeasurement(abs(z_hi - z_lo), geom.thickness, profile)


def measure_phase_step(state: SpinorField, location: float, healing_length: float,
                       spin: int = -1, inner=3.0, outer=10.0) -> float:
    """Phase jump across ``location`` in component ``spin``.

    Mean phase over [z0 + 3 xi, z0 + 10 xi] minus that over
    [z0 - 10 xi, z0 - 3 xi], reduced to (-pi, pi].  Each window is unwrapped
    on its own, so the result does not depend on a global phase.
    """
    z = state.grid.z
    psi = state.amplitudes[component(spin)]
    dens = np.abs(psi) ** 2
    keep = dens > PHASE_MASK * dens.max() if dens.max() > 0 else np.zeros(dens.shape, bool)
    means = []
    for a, b in ((-outer, -inner), (inner, outer)):
        sel = (z >= location + a * healing_length) & (z <= location + b * healing_length)
        if sel.sum() < 2 or not keep[sel].all():
            raise MeasurementError(f"no density plateau on both sides of z = {location:.3g} m")
        ph = np.unwrap(np.angle(psi[sel]))
        means.append(ph.mean())
    step = means[1] - means[0]
    return float(np.angle(np.exp(1j * step)))


@dataclass(frozen=True)
class Detection:
    position: float  # m
    depth: float  # 1 - n/background at the minimum
    fwhm: float  # m
    phase_step: float = math.nan  # rad


def background_density(ground: SpinorField, norm: float | None = None) -> np.ndarray:
    """Ground-state total density rescaled to ``norm`` (m^-1)."""
    dens = ground.total_density()
    if norm is None:
        return dens
    return dens * norm / ground.norm()


def _density_ratio(state, background, support):
    bg = np.asarray(background)
    inside = bg > support * bg.max()
    ratio = np.ones_like(bg)
    ratio[inside] = state.total_density()[inside] / bg[inside]
    return ratio, inside


def detect_solitons(state: SpinorField, background, healing_length: float,
                    threshold=DEPTH_THRESHOLD, support=0.05, spin=-1):
    """Density notches deeper than ``threshold`` relative to ``background``.

    Only points where the background exceeds ``support`` times its peak are
    searched.  Positions are refined by a parabola through the three points
    around each minimum.  The phase step is measured in component ``spin``
    and left as nan when no plateaus are available.
    """
    z = state.grid.z
    dz = state.grid.dz
    ratio, inside = _density_ratio(state, background, support)
    r = np.where(inside, ratio, np.inf)
    cand = np.nonzero((r[1:-1] < 1 - threshold) & (r[1:-1] <= r[:-2]) & (r[1:-1] < r[2:]))[0] + 1
    found = []
    for i in cand:
        a, b, c = ratio[i - 1], ratio[i], ratio[i + 1]
        curv = a - 2 * b + c
        shift = 0.5 * (a - c) / curv if curv > 0 else 0.0
        pos = z[i] + shift * dz
        r_min = b - 0.25 * (a - c) * shift
        depth = float(min(1.0, 1.0 - r_min))
        half = 1.0 - 0.5 * depth
        left = i
        while left > 0 and inside[left] and ratio[left] < half:
            left -= 1
        right = i
        while right < z.size - 1 and inside[right] and ratio[right] < half:
            right += 1
        if ratio[left] < half or ratio[right] < half:
            continue
        zl = z[left] + (half - ratio[left]) * dz / (ratio[left + 1] - ratio[left])
        zr = z[right - 1] + (half - ratio[right - 1]) * dz / (ratio[right] - ratio[right - 1])
        try:
            step = measure_phase_step(state, pos, healing_length, spin)
        except MeasurementError:
            step = math.nan
        found.append(Detection(float(pos), depth, float(zr - zl), step))
    return found


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    detections: list = field(default_factory=list)

    @property
    def positions(self) -> np.ndarray:
        return np.array([d.position for d in self.detections])

    @property
    def depths(self) -> np.ndarray:
        return np.array([d.depth for d in self.detections])

    def velocities(self) -> np.ndarray:
        t = np.asarray(self.times)
        if t.size < 2:
            return np.zeros(t.size)
        return np.gradient(self.positions, t)


@dataclass(frozen=True)
class SolitonTrack:
    trajectories: list
    flagged_frames: tuple = ()


def track_solitons(frames, max_jump=math.inf):
    """Associate detections frame to frame.

    ``frames`` is a sequence of ``(time, detections)``.  Each frame is matched
    to the open trajectories by minimal total displacement; detections with
    no partner within ``max_jump`` start a new trajectory.  A frame is flagged
    when some detection had two candidates closer than ``max_jump``.
    """
    from scipy.optimize import linear_sum_assignment

    frames = list(frames)
    if len(frames) < 2:
        raise ValueError("tracking needs at least two frames")
    trajs: list[Trajectory] = []
    flagged = []
    for k, (t, dets) in enumerate(frames):
        open_ = [tr for tr in trajs if tr.times and tr.times[-1] == frames[k - 1][0]] if k else []
        used = set()
        if open_ and dets:
            last = np.array([tr.detections[-1].position for tr in open_])
            now = np.array([d.position for d in dets])
            cost = np.abs(last[:, None] - now[None, :])
            if np.any((cost < max_jump).sum(axis=0) > 1) or np.any((cost < max_jump).sum(axis=1) > 1):
                flagged.append(k)
            rows, cols = linear_sum_assignment(cost)
            for i, j in zip(rows, cols):
                if cost[i, j] <= max_jump:
                    open_[i].times.append(t)
                    open_[i].detections.append(dets[j])
                    used.add(j)
        for j, d in enumerate(dets):
            if j not in used:
                trajs.append(Trajectory([t], [d]))
    return SolitonTrack(trajs, tuple(flagged))


def velocity_correlation(a: Trajectory, b: Trajectory, t_max=math.inf) -> float:
    """Zero-lag Pearson correlation of two trajectories' velocities over
    their common times up to ``t_max``."""
    ta = dict(zip(a.times, a.velocities()))
    tb = dict(zip(b.times, b.velocities()))
    common = sorted(t for t in ta if t in tb and t <= t_max)
    if len(common) < 3:
        raise MeasurementError("trajectories share fewer than three frames")
    va = np.array([ta[t] for t in common])
    vb = np.array([tb[t] for t in common])
    return float(np.corrcoef(va, vb)[0, 1])


def sound_diagnostic(state: SpinorField, background, detections=(), exclusion=None,
                     healing_length=None, tf_radius=None) -> float:
    """max |n - background| / max(background) away from solitons.

    Excludes +/- ``exclusion`` (default 5 xi) around each detection and the
    outer 10% of the Thomas-Fermi region.
    """
    z = state.grid.z
    bg = np.asarray(background)
    if exclusion is None:
        if healing_length is None:
            raise ValueError("give exclusion or healing_length")
        exclusion = 5 * healing_length
    if tf_radius is None:
        above = np.nonzero(bg > 0.005 * bg.max())[0]
        tf_radius = max(abs(z[above[0]]), abs(z[above[-1]]))
    sel = np.abs(z) <= 0.9 * tf_radius
    for d in detections:
        pos = d.position if isinstance(d, Detection) else float(d)
        sel &= np.abs(z - pos) > exclusion
    if not sel.any():
        return 0.0
    return float(np.max(np.abs(state.total_density()[sel] - bg[sel])) / bg.max())
