import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from mrcsim.dynamics import (
    ControlSegment,
    HamiltonianTerms,
    Projection,
    StepperConfig,
    evolve,
    fft_workers,
    step_real,
)
from mrcsim.errors import NumericalError
from mrcsim.pulses import pulse_from_dimensionless
from mrcsim.spin import FX, FZ
from mrcsim.spinor import SpinorField
from mrcsim.units import CondensateParams, Grid, PhysicalConstants

TWO_PI = 2 * math.pi
C = PhysicalConstants()
FREE = CondensateParams(atom_number=0, axial_freq=20.0, radial_freq=500.0)


def test_stepper_config_validation():
    with pytest.raises(ValueError):
        StepperConfig(dt_pulse=0)


def test_fft_workers_from_environment(monkeypatch):
    monkeypatch.setenv("MRC_SIM_THREADS", "3")
    assert fft_workers() == 3
    monkeypatch.setenv("MRC_SIM_THREADS", "lots")
    assert fft_workers() == 1
    monkeypatch.delenv("MRC_SIM_THREADS")
    assert fft_workers() == 1


def test_empty_schedule_returns_initial(small_grid, gaussian):
    terms = HamiltonianTerms(small_grid, C, FREE)
    state = SpinorField.from_component(small_grid, gaussian)
    snaps = evolve(state, terms, [])
    assert len(snaps) == 1
    assert np.allclose(snaps[0].amplitudes, state.amplitudes, rtol=1e-14, atol=0)


def test_snapshot_cadence(small_grid, gaussian):
    terms = HamiltonianTerms(small_grid, C, FREE)
    state = SpinorField.from_component(small_grid, gaussian)
    cfg = StepperConfig(dt_free=1e-5)
    stages = [ControlSegment(1e-3), ControlSegment(2e-3)]
    snaps = evolve(state, terms, stages, snapshot_every=1.0, config=cfg)
    assert [s.time for s in snaps] == pytest.approx([0, 1e-3, 3e-3])
    snaps = evolve(state, terms, stages, snapshot_every=0.5e-3, config=cfg)
    times = [s.time for s in snaps]
    assert times == pytest.approx([0, 0.5e-3, 1e-3, 1.5e-3, 2e-3, 2.5e-3, 3e-3])


def test_projection_stage(small_grid, gaussian):
    terms = HamiltonianTerms(small_grid, C, FREE)
    state = SpinorField(small_grid, np.vstack([gaussian, gaussian, gaussian]) / math.sqrt(3))
    snaps = evolve(state, terms, [Projection({-1})])
    assert snaps[-1].component_norms() == pytest.approx([1 / 3, 0, 0])


def test_coherent_state_oscillates_at_trap_frequency():
    a_ho = math.sqrt(C.hbar / (C.atom_mass * FREE.omega_z))
    grid = Grid.symmetric(512, 12 * a_ho)
    z0 = 3 * a_ho
    psi = np.exp(-((grid.z - z0) / a_ho) ** 2 / 2).astype(complex)
    psi /= math.sqrt(np.sum(np.abs(psi) ** 2) * grid.dz)
    terms = HamiltonianTerms(grid, C, FREE)
    period = 1 / FREE.axial_freq
    cfg = StepperConfig(dt_free=period / 2000)
    snaps = evolve(SpinorField.from_component(grid, psi), terms, [ControlSegment(period)],
                   snapshot_every=period / 40, config=cfg)
    t = np.array([s.time for s in snaps])
    com = np.array([np.sum(grid.z * s.total_density()) * grid.dz for s in snaps])
    expected = z0 * np.cos(FREE.omega_z * t)
    assert np.max(np.abs(com - expected)) < 1e-3 * z0


def test_uniform_rabi_period():
    grid = Grid.symmetric(16, 0.5e-6)
    terms = HamiltonianTerms(grid, C, FREE)
    psi = np.ones(16, dtype=complex) / math.sqrt(1e-6)
    omega = TWO_PI * 50e3
    state = SpinorField.from_component(grid, psi)
    seg = ControlSegment(2 * math.pi / omega, rabi=lambda t: np.full_like(t, omega))
    end = evolve(state, terms, [seg])[-1]
    assert end.component_norms()[0] == pytest.approx(1.0, abs=1e-6)
    half = evolve(state, terms, [ControlSegment(math.pi / omega, rabi=lambda t: np.full_like(t, omega))])
    assert half[-1].component_norms()[2] == pytest.approx(1.0, abs=1e-6)


def test_point_dynamics_match_ode_oracle():
    # a uniform condensate on a tiny grid with no gradient: every point follows
    # the three-level equations under the swept pulse
    grid = Grid.symmetric(16, 0.5e-6)
    terms = HamiltonianTerms(grid, C, FREE)
    pulse = pulse_from_dimensionless(TWO_PI * 300e3, 3.2, 5.0, 0.003, gradient=237.5)
    seg = ControlSegment(pulse.duration, rabi=pulse.rabi, detuning=pulse.detuning)
    state = SpinorField.from_component(grid, np.ones(16) / math.sqrt(1e-6))
    end = evolve(state, terms, [seg])[-1]
    pops = end.component_norms()

    def rhs(t, y):
        psi = y[:3] + 1j * y[3:]
        d = -1j * ((pulse.detuning(t) * FZ + pulse.rabi(t) * FX) @ psi)
        return np.concatenate([d.real, d.imag])

    sol = solve_ivp(rhs, (0, pulse.duration), [1, 0, 0, 0, 0, 0], method="DOP853",
                    rtol=1e-12, atol=1e-12)
    oracle = sol.y[:3, -1] ** 2 + sol.y[3:, -1] ** 2
    assert np.max(np.abs(pops - oracle)) <= 1e-6


def test_step_real_matches_evolve(small_grid, gaussian):
    params = CondensateParams(atom_number=200, axial_freq=20.0, radial_freq=500.0)
    terms = HamiltonianTerms(small_grid, C, params)
    state = SpinorField.from_component(small_grid, gaussian)
    omega, delta, grad = TWO_PI * 20e3, TWO_PI * 5e3, 10.0
    one = step_real(state, terms, 1e-7, omega, delta, grad)
    seg = ControlSegment(1e-7, rabi=lambda t: np.full_like(t, omega),
                         detuning=lambda t: np.full_like(t, delta), gradient=grad)
    other = evolve(state, terms, [seg], config=StepperConfig(dt_pulse=1e-7))[-1]
    assert np.allclose(one.amplitudes, other.amplitudes, atol=1e-12 * np.abs(gaussian).max())
    assert one.time == pytest.approx(1e-7)


def test_norm_conserved_with_coupling(small_grid, gaussian):
    params = CondensateParams(atom_number=500, axial_freq=20.0, radial_freq=500.0)
    terms = HamiltonianTerms(small_grid, C, params)
    seg = ControlSegment(20e-6, rabi=lambda t: TWO_PI * 30e3 * np.sin(1e5 * t),
                         detuning=lambda t: TWO_PI * 10e3 * np.cos(2e5 * t), gradient=-50.0)
    end = evolve(SpinorField.from_component(small_grid, gaussian), terms, [seg])[-1]
    assert abs(end.norm() - 1) < 1e-9
    assert end.component_norms()[1:].sum() > 0.01


def test_second_order_convergence(small_grid, gaussian):
    params = CondensateParams(atom_number=2000, axial_freq=20.0, radial_freq=500.0)
    terms = HamiltonianTerms(small_grid, C, params)
    state = SpinorField.from_component(small_grid, gaussian * np.exp(1j * 2e5 * small_grid.z))
    seg = ControlSegment(4e-6, rabi=lambda t: TWO_PI * 60e3 * np.sin(4e5 * t) ** 2,
                         detuning=lambda t: TWO_PI * 40e3 * np.cos(6e5 * t), gradient=-30.0)

    def run(dt):
        return evolve(state, terms, [seg], config=StepperConfig(dt_pulse=dt))[-1].amplitudes

    dt = 2e-7
    ref = run(dt / 8)
    errs = [np.linalg.norm(run(h) - ref) for h in (dt, dt / 2)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)


def test_non_finite_raises(small_grid, gaussian):
    terms = HamiltonianTerms(small_grid, C, FREE)
    bad = gaussian.copy()
    bad[3] = np.nan
    with pytest.raises(NumericalError):
        evolve(SpinorField.from_component(small_grid, bad), terms, [ControlSegment(1e-5)],
               config=StepperConfig(dt_free=1e-6))


def test_zero_length_stage_is_identity(small_grid, gaussian):
    terms = HamiltonianTerms(small_grid, C, FREE)
    state = SpinorField.from_component(small_grid, gaussian)
    snaps = evolve(state, terms, [ControlSegment(0.0)], snapshot_every=1e-6)
    assert len(snaps) == 2 and snaps[-1].time == 0.0
    assert np.allclose(snaps[-1].amplitudes, state.amplitudes, rtol=1e-14, atol=0)
