"""Stage sequences for the MRC protocol, recipe files and phase calibration.

A sequence is an ordered list of stages: coupled pulses (with their own
gradient), phase waits at uniform detuning, free evolution and projections.
Stage start times are derived, so sequences are contiguous by construction.

Recipe files (``.seq``) are plain text.  Lines before the first ``stage``
line set sequence-level keys; every ``stage = pulse|wait|free|project``
line opens a stanza whose keys follow::

    description = single black soliton
    stage = pulse
    rabi_khz = 300          # Omega0 / 2 pi
    mu = 3.2
    gamma = 5.0
    alpha = 0.003
    delta1_khz = 960        # Delta1 / 2 pi
    gradient_g_per_cm = -237.5
    sweep = forward         # or reverse
    stage = wait
    detuning_khz = 79.5
    duration_us = 5
    stage = project
    keep = -1
    stage = free
    duration_ms = 830
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dynamics import ControlSegment, Projection, StepperConfig, evolve
from .errors import CalibrationError, ConfigurationError, MeasurementError, ValidationError
from .pulses import HSPulse, predicted_slice
from .spinor import SPIN_INDICES, SpinorField, project
from .units import PhysicalConstants

log = logging.getLogger(__name__)

TWO_PI = 2 * math.pi
#: tolerance on the mu * Gamma product of derived recipes
PRODUCT_TOLERANCE = 0.01


@dataclass(frozen=True)
class PulseStage:
    pulse: HSPulse
    kind: str = field(default="pulse", init=False)

    def __post_init__(self):
        if math.isnan(self.pulse.gradient):
            raise ValidationError("pulse stage needs a gradient")

    @property
    def duration(self) -> float:
        return self.pulse.duration

    def segment(self, constants=None) -> ControlSegment:
        return self.pulse.segment(constants)


@dataclass(frozen=True)
class WaitStage:
    """Uniform detuning ``detuning`` (rad/s) for ``duration`` s, no gradient
    and no coupling."""

    detuning: float
    duration: float
    kind: str = field(default="wait", init=False)

    def __post_init__(self):
        if self.duration < 0:
            raise ValidationError("wait duration must be non-negative")

    def segment(self, constants=None) -> ControlSegment:
        return ControlSegment(self.duration, detuning=self.detuning, label="wait", fine=True)


@dataclass(frozen=True)
class FreeStage:
    duration: float
    kind: str = field(default="free", init=False)

    def __post_init__(self):
        if self.duration < 0:
            raise ValidationError("free evolution duration must be non-negative")

    def segment(self, constants=None) -> ControlSegment:
        return ControlSegment(self.duration, label="free")


@dataclass(frozen=True)
class ProjectStage:
    keep: frozenset = frozenset({-1})
    kind: str = field(default="project", init=False)
    duration: float = field(default=0.0, init=False)

    def __post_init__(self):
        keep = frozenset(self.keep)
        if not keep or not keep <= set(SPIN_INDICES):
            raise ValidationError(f"keep must be a non-empty subset of {SPIN_INDICES}")
        object.__setattr__(self, "keep", keep)

    def segment(self, constants=None) -> Projection:
        return Projection(self.keep)


@dataclass(frozen=True)
class Sequence:
    stages: tuple
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))

    @property
    def start_times(self) -> np.ndarray:
        d = np.array([s.duration for s in self.stages])
        return np.concatenate(([0.0], np.cumsum(d)[:-1])) if d.size else d

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.stages))

    @property
    def pulses(self) -> list[HSPulse]:
        return [s.pulse for s in self.stages if isinstance(s, PulseStage)]

    @property
    def coupled_time(self) -> float:
        """Time from the start of the first pulse to the end of the last."""
        idx = [i for i, s in enumerate(self.stages) if isinstance(s, PulseStage)]
        if not idx:
            return 0.0
        starts = self.start_times
        last = self.stages[idx[-1]]
        return float(starts[idx[-1]] + last.duration - starts[idx[0]])

    def check_timescale(self, healing_time: float):
        """Raise unless the coupled part of the protocol is shorter than t_xi."""
        if self.coupled_time >= healing_time:
            raise ValidationError(
                f"protocol takes {self.coupled_time * 1e6:.1f} us, "
                f"not shorter than t_xi = {healing_time * 1e6:.1f} us")

    def with_wait_detuning(self, detuning: float) -> Sequence:
        stages = [replace(s, detuning=detuning) if isinstance(s, WaitStage) else s
                  for s in self.stages]
        return replace(self, stages=tuple(stages))

    @property
    def wait_time(self) -> float:
        return float(sum(s.duration for s in self.stages if isinstance(s, WaitStage)))

    def segments(self, constants=None):
        return [s.segment(constants) for s in self.stages]


def single_soliton_sequence(pulse: HSPulse, dphi: float, t_phi: float,
                            first_gradient_sign: int = -1, free_time: float = 0.0,
                            keep=frozenset({-1})) -> Sequence:
    """Pulse, phase wait, inverted-gradient reversed pulse, projection.

    ``first_gradient_sign`` picks the gradient of the first pulse; the second
    pulse is the time-reversed copy under the opposite gradient.  A free
    evolution stage of ``free_time`` seconds is appended when positive.
    """
    if first_gradient_sign not in (-1, 1):
        raise ValidationError("first_gradient_sign must be +1 or -1")
    if math.isnan(pulse.gradient):
        raise ValidationError("pulse has no gradient set")
    p1 = replace(pulse, gradient_sign=first_gradient_sign)
    stages = [PulseStage(p1), WaitStage(dphi, t_phi), PulseStage(p1.reversed()),
              ProjectStage(frozenset(keep))]
    if free_time > 0:
        stages.append(FreeStage(free_time))
    return Sequence(tuple(stages), "single soliton")


def double_soliton_sequence(reference: HSPulse, mu: float, gamma: float, delta1: float,
                            dphi: float, t_phi: float, first_gradient_sign: int = -1,
                            free_time: float = 0.0, tolerance: float = PRODUCT_TOLERANCE):
    """Narrower slice at the reference gradient, Omega0 and alpha.

    The caller lowers mu and raises Gamma so that mu * Gamma, hence beta,
    t_p and the edge sharpness, stay those of ``reference``; a relative
    mismatch above ``tolerance`` is rejected.
    """
    product = reference.mu * reference.gamma
    if abs(mu * gamma - product) > tolerance * product:
        raise ValidationError(
            f"mu * Gamma = {mu * gamma:.4g} differs from the reference {product:.4g} "
            f"by more than {tolerance:.1%}")
    pulse = replace(reference, mu=mu, gamma=gamma, delta1=delta1)
    seq = single_soliton_sequence(pulse, dphi, t_phi, first_gradient_sign, free_time)
    return replace(seq, description="double soliton")


def run_sequence(sequence: Sequence, state: SpinorField, terms, config=StepperConfig(),
                 snapshot_every=None, on_snapshot=None, keep_snapshots=True):
    """Evolve ``state`` through ``sequence``; see :func:`mrcsim.dynamics.evolve`."""
    return evolve(state, terms, sequence.segments(terms.constants), snapshot_every,
                  config, on_snapshot, keep_snapshots)


@dataclass(frozen=True)
class ProtocolResult:
    after_first_pulse: SpinorField
    final: SpinorField  # after the last coupled stage, before projection
    projected: SpinorField


def run_protocol(sequence: Sequence, ground: SpinorField, terms,
                 config=StepperConfig(), snapshot_every=None, on_snapshot=None) -> ProtocolResult:
    """Run the coupled part of ``sequence`` (everything up to and including
    the first projection) and return the key states.

    ``snapshot_every`` and ``on_snapshot`` are passed to the propagator, for
    example to follow the centre-of-mass momentum during the pulses.
    """
    stages = []
    for s in sequence.stages:
        stages.append(s)
        if isinstance(s, ProjectStage):
            break
    snaps = evolve(ground, terms, [s.segment(terms.constants) for s in stages],
                   snapshot_every, config, on_snapshot)
    ends = ground.time + np.cumsum([s.duration for s in stages])
    tol = 1e-3 * config.dt_pulse

    def at(t):
        return [s for s in snaps if abs(s.time - t) <= tol]

    first = next(i for i, s in enumerate(stages) if isinstance(s, PulseStage))
    after1 = at(ends[first])[0]
    if isinstance(stages[-1], ProjectStage):
        final, projected = at(ends[-1])[-2:]
    else:
        final = at(ends[-1])[-1]
        projected = project(final, {-1})
    return ProtocolResult(after1, final, projected)


def _step_location(result: ProtocolResult, ground, healing_length, fallback):
    from .analysis import background_density, detect_solitons

    bg = background_density(ground, result.projected.norm())
    found = detect_solitons(result.projected, bg, healing_length)
    if not found:
        return fallback
    return min(found, key=lambda d: abs(d.position - fallback)).position


def inner_edge(pulse: HSPulse, constants=PhysicalConstants()) -> float:
    """Position (m) of the slice edge nearer z = 0."""
    lo, hi = predicted_slice(pulse, constants).edges
    return hi if abs(hi) <= abs(lo) else lo


def measure_protocol_step(sequence, ground, terms, healing_length, config=StepperConfig()):
    """(phase step in m = -1 after the protocol, its location, run result)."""
    from .analysis import measure_phase_step

    result = run_protocol(sequence, ground, terms, config)
    edge = inner_edge(sequence.pulses[0], terms.constants)
    z0 = _step_location(result, ground, healing_length, edge)
    return measure_phase_step(result.final, z0, healing_length), z0, result


def calibrate_phase_wait(sequence: Sequence, ground, terms, healing_length, t_phi=None,
                         config=StepperConfig(), tolerance=0.05, spin_f=1):
    """Wait detuning (rad/s) that makes the post-protocol step equal to pi.

    Runs ``sequence`` with zero wait detuning, measures the step phi0 and
    returns (pi - phi0) / (2 F t_phi) on the branch [0, 2 pi / (2 F t_phi)).
    A second run with that detuning must land within ``tolerance`` of pi,
    otherwise :class:`CalibrationError` carries the step it measured.
    Returns ``(dphi, phi0, verified_step)``.
    """
    t_phi = sequence.wait_time if t_phi is None else t_phi
    if not t_phi > 0:
        raise ValidationError("t_phi must be positive")
    base = _with_wait_time(sequence, t_phi).with_wait_detuning(0.0)
    phi0, _, _ = measure_protocol_step(base, ground, terms, healing_length, config)
    dphi = ((math.pi - phi0) % TWO_PI) / (2 * spin_f * t_phi)
    try:
        step, _, _ = measure_protocol_step(base.with_wait_detuning(dphi), ground, terms,
                                           healing_length, config)
    except MeasurementError as exc:
        raise CalibrationError(f"verification run failed: {exc}") from exc
    miss = abs(np.angle(np.exp(1j * (step - math.pi))))
    if miss > tolerance:
        raise CalibrationError(
            f"phi0 = {phi0:+.4f} rad gave 2pi x {dphi / TWO_PI / 1e3:.2f} kHz, but the "
            f"verification step {step:.4f} rad misses pi by {miss:.3f} rad", measured=step)
    return dphi, phi0, step


def soliton_velocity(sequence: Sequence, ground, terms, healing_length, settle=10e-3,
                     frames=10, config=StepperConfig()):
    """Velocity (m/s) of the soliton nearest the inner edge once the
    post-protocol transient has settled.

    The projected state evolves freely for ``settle`` seconds; a line is
    fitted to the tracked position over the last three quarters of it.
    """
    from .analysis import background_density, detect_solitons

    result = run_protocol(sequence, ground, terms, config)
    z0 = _step_location(result, ground, healing_length,
                        inner_edge(sequence.pulses[0], terms.constants))
    snaps = evolve(result.projected, terms, [ControlSegment(settle, label="settle")],
                   settle / frames, config)
    t, x = [], []
    for snap in snaps:
        if snap.time - result.projected.time < 0.25 * settle - 1e-12:
            continue
        found = detect_solitons(snap, background_density(ground, snap.norm()), healing_length)
        if found:
            z0 = min(found, key=lambda d: abs(d.position - z0)).position
            t.append(snap.time)
            x.append(z0)
    if len(t) < 3:
        raise MeasurementError("soliton lost while settling")
    return float(np.polyfit(t, x, 1)[0])


def calibrate_stationary_wait(sequence: Sequence, ground, terms, healing_length,
                              bracket=(TWO_PI * 60e3, TWO_PI * 100e3), settle=10e-3,
                              xtol=TWO_PI * 0.2e3, config=StepperConfig()):
    """Wait detuning (rad/s) for which the settled soliton does not move.

    Root of :func:`soliton_velocity` inside ``bracket``.  A stationary dark
    soliton carries a pi step, so this fixes the step of the soliton that
    remains after the transient rather than the step right after the pulses.
    """
    from scipy.optimize import brentq

    cache = {}

    def velocity(dphi):
        if dphi in cache:
            return cache[dphi]
        v = cache[dphi] = soliton_velocity(sequence.with_wait_detuning(dphi), ground, terms,
                             healing_length, settle, config=config)
        log.info("wait %.2f kHz: soliton velocity %.3g m/s", dphi / TWO_PI / 1e3, v)
        return v

    lo, hi = bracket
    v_lo, v_hi = velocity(lo), velocity(hi)
    if v_lo * v_hi > 0:
        raise CalibrationError("soliton velocity does not change sign inside the bracket",
                               measured=(v_lo, v_hi))
    return brentq(velocity, lo, hi, xtol=xtol)


def _with_wait_time(sequence, t_phi):
    stages = [replace(s, duration=t_phi) if isinstance(s, WaitStage) else s
              for s in sequence.stages]
    if not any(isinstance(s, WaitStage) for s in stages):
        raise ValidationError("sequence has no wait stage")
    return replace(sequence, stages=tuple(stages))


# --- recipe files ---------------------------------------------------------

_PULSE_KEYS = {"rabi_khz", "mu", "gamma", "alpha", "delta1_khz", "gradient_g_per_cm", "sweep"}
_STAGE_KEYS = {
    "pulse": _PULSE_KEYS,
    "wait": {"detuning_khz", "duration_us"},
    "free": {"duration_ms"},
    "project": {"keep"},
}
_HEADER_KEYS = {"description", "snapshot_every_ms"}


def _parse_lines(text, source):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        yield lineno, key, value


def _number(stanza, key, source):
    try:
        return float(stanza[key])
    except KeyError:
        raise ConfigurationError(f"{source}: missing key '{key}'") from None
    except ValueError:
        raise ConfigurationError(f"{source}: key '{key}' is not a number") from None


def _build_stage(kind, stanza, source):
    missing = _STAGE_KEYS[kind] - set(stanza) - ({"sweep"} if kind == "pulse" else set())
    if missing:
        raise ConfigurationError(f"{source}: {kind} stage missing key '{sorted(missing)[0]}'")
    if kind == "pulse":
        grad = _number(stanza, "gradient_g_per_cm", source)
        if grad == 0:
            raise ConfigurationError(f"{source}: gradient_g_per_cm must be non-zero")
        sweep = stanza.get("sweep", "forward")
        if sweep not in ("forward", "reverse"):
            raise ConfigurationError(f"{source}: sweep must be 'forward' or 'reverse'")
        pulse = HSPulse(TWO_PI * 1e3 * _number(stanza, "rabi_khz", source),
                        _number(stanza, "mu", source), _number(stanza, "gamma", source),
                        _number(stanza, "alpha", source),
                        TWO_PI * 1e3 * _number(stanza, "delta1_khz", source),
                        gradient_sign=1 if grad > 0 else -1,
                        time_reversed=sweep == "reverse", gradient=abs(grad))
        return PulseStage(pulse)
    if kind == "wait":
        return WaitStage(TWO_PI * 1e3 * _number(stanza, "detuning_khz", source),
                         1e-6 * _number(stanza, "duration_us", source))
    if kind == "free":
        return FreeStage(1e-3 * _number(stanza, "duration_ms", source))
    try:
        keep = frozenset(int(k) for k in stanza["keep"].replace(",", " ").split())
    except ValueError:
        raise ConfigurationError(f"{source}: keep must list spin indices") from None
    return ProjectStage(keep)


def parse_sequence(text: str, source: str = "<sequence>"):
    """Parse recipe text; returns ``(Sequence, header dict)``."""
    header: dict[str, str] = {}
    stanzas: list[tuple[str, dict]] = []
    for lineno, key, value in _parse_lines(text, source):
        if key == "stage":
            if value not in _STAGE_KEYS:
                raise ConfigurationError(f"{source}:{lineno}: unknown stage '{value}'")
            stanzas.append((value, {}))
            continue
        allowed = _STAGE_KEYS[stanzas[-1][0]] if stanzas else _HEADER_KEYS
        if key not in allowed:
            raise ConfigurationError(f"{source}:{lineno}: unknown key '{key}'")
        target = stanzas[-1][1] if stanzas else header
        if key in target:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key '{key}'")
        target[key] = value
    if not stanzas:
        raise ConfigurationError(f"{source}: no stages")
    stages = tuple(_build_stage(kind, st, f"{source} stage {i + 1}")
                   for i, (kind, st) in enumerate(stanzas))
    return Sequence(stages, header.get("description", "")), header


def load_sequence(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read recipe {path}: {exc.strerror}") from None
    return parse_sequence(text, str(path))


def _fmt(x):
    return repr(float(x)) if not float(x).is_integer() else str(int(x))


def format_sequence(sequence: Sequence, header=None) -> str:
    """Recipe text that :func:`parse_sequence` reads back to ``sequence``."""
    lines = []
    head = dict(header or {})
    if sequence.description:
        head.setdefault("description", sequence.description)
    for key, value in head.items():
        lines.append(f"{key} = {value}")
    for stage in sequence.stages:
        lines.append("")
        lines.append(f"stage = {stage.kind}")
        if isinstance(stage, PulseStage):
            p = stage.pulse
            lines += [f"rabi_khz = {_fmt(p.omega0 / TWO_PI / 1e3)}", f"mu = {_fmt(p.mu)}",
                      f"gamma = {_fmt(p.gamma)}", f"alpha = {_fmt(p.alpha)}",
                      f"delta1_khz = {_fmt(p.delta1 / TWO_PI / 1e3)}",
                      f"gradient_g_per_cm = {_fmt(p.signed_gradient)}",
                      f"sweep = {'reverse' if p.time_reversed else 'forward'}"]
        elif isinstance(stage, WaitStage):
            lines += [f"detuning_khz = {_fmt(stage.detuning / TWO_PI / 1e3)}",
                      f"duration_us = {_fmt(stage.duration * 1e6)}"]
        elif isinstance(stage, FreeStage):
            lines.append(f"duration_ms = {_fmt(stage.duration * 1e3)}")
        else:
            lines.append("keep = " + ", ".join(str(m) for m in sorted(stage.keep)))
    return "\n".join(lines) + "\n"


def recipe_path(name: str) -> Path:
    """Path of a recipe or config shipped with the package."""
    from importlib.resources import files

    path = Path(str(files("mrcsim") / "recipes" / name))
    if not path.exists():
        raise FileNotFoundError(f"no packaged recipe named {name!r}")
    return path
