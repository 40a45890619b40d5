import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrcsim.analysis import (
    Detection,
    Trajectory,
    background_density,
    detect_solitons,
    local_spin_projection,
    measure_phase_step,
    measure_slice_sharpness,
    rise_distance,
    sound_diagnostic,
    track_solitons,
    velocity_correlation,
)
from mrcsim.errors import MeasurementError
from mrcsim.spinor import SpinorField
from mrcsim.units import Grid

XI = 0.5e-6


@pytest.fixture(scope="module")
def flat():
    """Uniform m = -1 condensate on a 200 um box with 8 points per xi."""
    grid = Grid.symmetric(4096, 100e-6)
    psi = np.ones(grid.num_points, dtype=complex) / math.sqrt(200e-6)
    return SpinorField.from_component(grid, psi)


def imprint(state, z0, xi=XI):
    out = state.copy()
    out.amplitudes[0] *= np.tanh((state.grid.z - z0) / (math.sqrt(2) * xi))
    return out


def test_rise_distance_linear_ramp():
    z = np.linspace(0, 10, 1001)
    f = np.clip((z - 2) / 5, 0, 1)
    assert rise_distance(z, f) == pytest.approx(4.0, abs=1e-9)
    assert rise_distance(z[::-1], f[::-1]) == pytest.approx(4.0, abs=1e-9)
    with pytest.raises(MeasurementError):
        rise_distance(z, np.zeros_like(z))


def test_perfect_step_is_grid_limited(ground, reference_pulse):
    state = ground.copy()
    z = state.grid.z
    up = z < 0
    state.amplitudes[2, up] = state.amplitudes[0, up]
    state.amplitudes[0, up] = 0
    m = measure_slice_sharpness(state, reference_pulse)
    assert m.available
    assert m.sharpness <= 2 * state.grid.dz
    assert m.thickness == pytest.approx(115.5e-6, rel=2e-3)


def test_edge_outside_condensate_is_unavailable(ground, reference_pulse):
    from dataclasses import replace

    far = replace(reference_pulse, delta1=reference_pulse.delta1 - 2 * math.pi * 3e6)
    m = measure_slice_sharpness(ground, far)
    assert not m.available and math.isnan(m.resolution)
    assert m.thickness > 0


def test_spin_projection_values(flat):
    s = flat.copy()
    s.amplitudes[2, :10] = s.amplitudes[0, :10]
    s.amplitudes[0, :10] = 0
    s.amplitudes[1, 10:20] = s.amplitudes[0, 10:20]
    s.amplitudes[0, 10:20] = 0
    proj = local_spin_projection(s)
    assert np.allclose(proj[:10], 1) and np.allclose(proj[10:20], 0.5) and np.allclose(proj[20:], 0)


def test_phase_step_of_constructed_input(flat):
    s = flat.copy()
    s.amplitudes[0] *= np.where(s.grid.z > 0, np.exp(0.4j * math.pi), 1.0)
    assert measure_phase_step(s, 0.0, XI) == pytest.approx(0.4 * math.pi, abs=0.01)
    assert measure_phase_step(flat, 0.0, XI) == pytest.approx(0.0, abs=0.01)


@pytest.mark.parametrize("phi", np.linspace(-math.pi, math.pi, 10, endpoint=False))
def test_phase_step_ignores_global_phase(flat, phi):
    s = imprint(flat, 3e-6)
    s.amplitudes[0] *= np.where(s.grid.z > 3e-6, np.exp(0.7j), 1.0)
    base = measure_phase_step(s, 3e-6, XI)
    s.amplitudes *= np.exp(1j * phi)
    diff = measure_phase_step(s, 3e-6, XI) - base
    assert abs(np.angle(np.exp(1j * diff))) < 1e-9
    assert abs(base) == pytest.approx(math.pi - 0.7, abs=1e-6)


def test_phase_step_needs_plateaus(flat):
    with pytest.raises(MeasurementError):
        measure_phase_step(flat, 99.5e-6, XI)
    s = flat.copy()
    s.amplitudes[0, np.abs(s.grid.z - 4e-6) < 0.2e-6] = 0
    with pytest.raises(MeasurementError):
        measure_phase_step(s, 0.0, XI)


def test_detects_imprinted_soliton(flat):
    z0 = 7.3e-6
    s = imprint(flat, z0)
    found = detect_solitons(s, flat.total_density(), XI)
    assert len(found) == 1
    d = found[0]
    assert abs(d.position - z0) <= flat.grid.dz
    # tanh^2 profile: FWHM = 2 sqrt2 atanh(1/sqrt2) xi = 2.493 xi
    assert d.fwhm == pytest.approx(2 * math.sqrt(2) * math.atanh(math.sqrt(0.5)) * XI, rel=0.01)
    assert d.depth == pytest.approx(1.0, abs=1e-3)
    assert abs(abs(d.phase_step) - math.pi) < 0.01


def test_no_detection_in_ground_state(ground):
    assert detect_solitons(ground, background_density(ground), 0.5e-6) == []


@settings(max_examples=15, deadline=None)
@given(st.floats(-60e-6, 60e-6), st.floats(0.3e-6, 1.0e-6))
def test_detection_is_mirror_consistent(z0, xi):
    grid = Grid.symmetric(2048, 100e-6)
    # z_k -> -z_k maps index k to (N - k) mod N on this grid
    z = grid.z
    psi = np.exp(-(z / 60e-6) ** 2) * np.tanh((z - z0) / (math.sqrt(2) * xi))
    bg = np.exp(-2 * (z / 60e-6) ** 2)
    s = SpinorField.from_component(grid, psi)
    mirrored = SpinorField.from_component(grid, np.roll(psi[::-1], 1))
    a = detect_solitons(s, bg, xi)
    b = detect_solitons(mirrored, np.roll(bg[::-1], 1), xi)
    assert len(a) == len(b) == 1
    assert a[0].position == pytest.approx(-b[0].position, abs=1e-12)
    assert a[0].fwhm == pytest.approx(b[0].fwhm, rel=1e-9)


def test_background_rescaling(ground):
    bg = background_density(ground, 0.5)
    assert np.sum(bg) * ground.grid.dz == pytest.approx(0.5)


def make_frames(paths, times):
    return [(t, [Detection(p[i], 1.0, 1e-6) for p in paths]) for i, t in enumerate(times)]


def test_tracking_follows_crossing_free_paths():
    t = np.linspace(0, 1, 50)
    a = -10e-6 + 2e-6 * np.sin(2 * math.pi * t)
    b = 10e-6 - 2e-6 * np.sin(2 * math.pi * t)
    track = track_solitons(make_frames([b, a], t), max_jump=1e-6)
    assert len(track.trajectories) == 2
    starts = sorted(tr.positions[0] for tr in track.trajectories)
    assert starts == pytest.approx([-10e-6, 10e-6])
    for tr in track.trajectories:
        assert np.max(np.abs(np.diff(tr.positions))) < 1e-6
    assert track.flagged_frames == ()
    va, vb = (tr for tr in sorted(track.trajectories, key=lambda tr: tr.positions[0]))
    assert velocity_correlation(va, vb) == pytest.approx(-1.0, abs=1e-6)


def test_tracking_flags_ambiguity_and_starts_new_paths():
    frames = [(0.0, [Detection(0.0, 1, 1)]),
              (1.0, [Detection(0.1, 1, 1), Detection(-0.1, 1, 1)]),
              (2.0, [Detection(50.0, 1, 1)])]
    track = track_solitons(frames, max_jump=1.0)
    assert 1 in track.flagged_frames
    assert len(track.trajectories) == 3
    with pytest.raises(ValueError):
        track_solitons(frames[:1])


def test_in_phase_correlation():
    t = np.linspace(0, 1, 40)
    a = Trajectory(list(t), [Detection(17e-6 * math.cos(3 * x), 1, 1) for x in t])
    b = Trajectory(list(t), [Detection(21e-6 * math.cos(3 * x), 1, 1) for x in t])
    assert velocity_correlation(a, b) > 0.99
    with pytest.raises(MeasurementError):
        velocity_correlation(a, b, t_max=0.01)


def test_sound_diagnostic(ground, flat):
    bg = background_density(ground)
    assert sound_diagnostic(ground, bg, healing_length=XI) < 1e-12
    s = imprint(flat, 0.0)
    flat_bg = flat.total_density()
    # outside the 5 xi exclusion only the tanh^2 tail is left: 1 - tanh^2(5 / sqrt2)
    tail = 1 - math.tanh(5 / math.sqrt(2)) ** 2
    amp = sound_diagnostic(s, flat_bg, detect_solitons(s, flat_bg, XI), healing_length=XI)
    assert 0.5 * tail < amp <= tail
    assert sound_diagnostic(s, flat_bg, (), healing_length=XI) > 0.9
    with pytest.raises(ValueError):
        sound_diagnostic(s, flat_bg)
