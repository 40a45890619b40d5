"""
Writing a single dark soliton with two adiabatic pulses
=======================================================

Pulse 1 moves the left part of an m = -1 condensate to m = +1, a short wait
under a uniform detuning gives the two components a relative phase, and a
time-reversed pulse under the inverted gradient brings the atoms back.  The
phase difference left across the slice edge is a pi step: a dark soliton.

Pass the free evolution time in ms as the first argument (default 50).
Expect a few minutes on one core for the default.
"""

import math
import sys
import time
from dataclasses import replace

import numpy as np

from mrcsim.analysis import (
    background_density,
    detect_solitons,
    measure_phase_step,
    measure_slice_sharpness,
)
from mrcsim.config import load_config
from mrcsim.dynamics import HamiltonianTerms
from mrcsim.ground_state import solve_ground_state
from mrcsim.protocol import (
    FreeStage,
    inner_edge,
    load_sequence,
    recipe_path,
    run_protocol,
    run_sequence,
)
from mrcsim.units import derive_scales, make_grid

free_ms = float(sys.argv[1]) if len(sys.argv) > 1 else 50.0

cfg = load_config(recipe_path("rb87.cfg"))
nl = cfg.nonlinearity()
scales = derive_scales(cfg.constants, cfg.params, nonlinearity=nl)
grid = make_grid(scales, cfg.points_per_xi, cfg.padding)
terms = HamiltonianTerms(grid, cfg.constants, cfg.params, nl)
print(f"{grid.num_points} grid points over +-{grid.z_max * 1e6:.1f} um")

# %%
# Ground state by imaginary-time propagation, then the scales it implies.
t0 = time.time()
ground = solve_ground_state(cfg.params, cfg.constants, grid, cfg.ground_tolerance, nonlinearity=nl)
scales = derive_scales(cfg.constants, cfg.params, ground, nl)
xi = scales.healing_length
print(f"ground state in {time.time() - t0:.0f} s: xi = {xi * 1e9:.1f} nm, "
      f"z_TF = {scales.thomas_fermi_radius * 1e6:.1f} um, t_xi = {scales.healing_time * 1e6:.0f} us")

# %%
# The coupled part of the recipe, up to the projection onto m = -1.
seq, _ = load_sequence(recipe_path("single_soliton.seq"))
n = next(i for i, s in enumerate(seq.stages) if s.kind == "project") + 1
head = replace(seq, stages=seq.stages[:n])
print(f"coupled time {head.coupled_time * 1e6:.1f} us, "
      f"wait detuning 2pi x {head.stages[1].detuning / (2 * math.pi) / 1e3:.1f} kHz")
t0 = time.time()
result = run_protocol(head, ground, terms)
print(f"protocol in {time.time() - t0:.0f} s")

pulse = head.pulses[0]
sharp = measure_slice_sharpness(result.after_first_pulse, pulse)
print(f"after pulse 1: slice {sharp.thickness * 1e6:.1f} um, edge width "
      f"{sharp.sharpness * 1e6:.2f} um")
print("populations after pulse 2 (-1, 0, +1):",
      " ".join(f"{p:.4f}" for p in result.final.component_norms()))

edge = inner_edge(pulse)
bg = background_density(ground, result.projected.norm())
det = min(detect_solitons(result.projected, bg, xi), key=lambda d: abs(d.position - edge))
step = measure_phase_step(result.final, det.position, xi)
print(f"notch at {det.position * 1e6:.2f} um, depth {det.depth:.2f}, FWHM {det.fwhm * 1e6:.2f} um, "
      f"phase step {step:+.2f} rad")

# %%
# Free evolution.  The notch sheds a little sound while the phase step
# settles at pi, then it stays put.
frames = []


def track(snap):
    found = detect_solitons(snap, background_density(ground, snap.norm()), xi)
    if found:
        d = min(found, key=lambda d: abs(d.position - det.position))
        frames.append((snap.time - result.projected.time, d))


t0 = time.time()
run_sequence(replace(seq, stages=(FreeStage(free_ms * 1e-3),)), result.projected, terms,
             snapshot_every=free_ms * 1e-4, on_snapshot=track, keep_snapshots=False)
print(f"{free_ms:.0f} ms of free evolution in {time.time() - t0:.0f} s")
print("  t/ms    z/um  depth  FWHM/um  step/rad")
for t, d in frames[::2]:
    print(f"{t * 1e3:6.1f} {d.position * 1e6:7.2f} {d.depth:6.2f} {d.fwhm * 1e6:8.2f} "
          f"{d.phase_step:+9.2f}")
pos = np.array([d.position for _, d in frames])
print(f"position range over the run: {np.ptp(pos) * 1e6:.2f} um")
