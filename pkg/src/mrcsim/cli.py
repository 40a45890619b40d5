"""Command-line front end: groundstate, describe, run, scan-pulse, analyze.

Exit codes: 0 success, 1 other failure, 3 configuration error, 4 numerical
failure, 5 a ``--check`` criterion failed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, MRCError, NumericalError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4
EXIT_CHECK = 5

TWO_PI = 2 * math.pi
log = logging.getLogger("mrcsim")


def _version() -> str:
    from importlib.metadata import PackageNotFoundError, version

    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _config(path):
    from .config import load_config
    from .protocol import recipe_path

    return load_config(path or recipe_path("rb87.cfg"))


def _sequence(path):
    from .protocol import load_sequence, recipe_path

    p = Path(path) if path else recipe_path("single_soliton.seq")
    if not p.exists() and not p.is_absolute() and p.parent == Path("."):
        try:
            p = recipe_path(p.name)
        except FileNotFoundError:
            pass
    return load_sequence(p)


def _terms_and_grid(cfg):
    from .dynamics import HamiltonianTerms
    from .units import derive_scales, make_grid

    nl = cfg.nonlinearity()
    if cfg.params.atom_number == 0:
        raise ConfigurationError("a simulation grid needs atoms > 0 (xi sets the spacing)")
    scales = derive_scales(cfg.constants, cfg.params, nonlinearity=nl)
    grid = make_grid(scales, cfg.points_per_xi, cfg.padding, cfg.max_grid_points)
    return HamiltonianTerms(grid, cfg.constants, cfg.params, nl), grid


def _solve_ground(cfg, grid):
    from .ground_state import solve_ground_state

    return solve_ground_state(cfg.params, cfg.constants, grid, cfg.ground_tolerance,
                              nonlinearity=cfg.nonlinearity(), full_output=True)


def _scales_row(scales):
    return {"xi_m": scales.healing_length, "c_m_per_s": scales.sound_speed,
            "t_xi_s": scales.healing_time, "z_tf_m": scales.thomas_fermi_radius,
            "mu_chem_J": scales.chemical_potential}


# --- groundstate ----------------------------------------------------------

def cmd_groundstate(args):
    from .spinor import write_spf1
    from .units import derive_scales

    cfg = _config(args.config)
    _, grid = _terms_and_grid(cfg)
    state, info = _solve_ground(cfg, grid)
    write_spf1(state, args.out)
    scales = derive_scales(cfg.constants, cfg.params, state, cfg.nonlinearity())
    row = _scales_row(scales)
    row["mu_chem_J"] = info.chemical_potential
    w = csv.DictWriter(sys.stdout, fieldnames=list(row))
    w.writeheader()
    w.writerow({k: f"{v:.9g}" for k, v in row.items()})
    return EXIT_OK


# --- describe -------------------------------------------------------------

def describe_lines(cfg, sequence, mu=None, gamma=None, n_steps=20_000):
    """Derived quantities as (name, value, unit) rows, without simulating."""
    from .pulses import point_sharpness, predicted_slice
    from .units import derive_scales

    rows = []
    if cfg.params.atom_number == 0:
        rows += [(k, "unavailable (linear regime)", "") for k in
                 ("xi", "c", "t_xi", "z_TF")]
    else:
        s = derive_scales(cfg.constants, cfg.params, nonlinearity=cfg.nonlinearity())
        rows += [("xi", s.healing_length * 1e9, "nm"), ("c", s.sound_speed * 1e3, "mm/s"),
                 ("t_xi", s.healing_time * 1e6, "us"),
                 ("z_TF", s.thomas_fermi_radius * 1e6, "um")]
    pulses = sequence.pulses
    if not pulses:
        return rows
    p = pulses[0]
    if mu is not None or gamma is not None:
        p = replace(p, mu=p.mu if mu is None else mu, gamma=p.gamma if gamma is None else gamma)
    geom = predicted_slice(p, cfg.constants)
    sharp = point_sharpness(p, cfg.constants, n_steps=n_steps)
    rows += [("t_p", p.duration * 1e6, "us"), ("Delta0/2pi", p.delta0 / TWO_PI / 1e3, "kHz"),
             ("beta/2pi", p.beta / TWO_PI / 1e3, "kHz"), ("dB/dz", p.gradient, "G/cm"),
             ("Delta_z", geom.thickness * 1e6, "um"), ("z_c", geom.center * 1e6, "um"),
             ("delta_z (point model)", sharp * 1e6, "um"),
             ("R predicted", geom.thickness / sharp, "")]
    if sequence.coupled_time:
        rows.append(("coupled time", sequence.coupled_time * 1e6, "us"))
    return rows


def cmd_describe(args):
    cfg = _config(args.config)
    seq, _ = _sequence(args.sequence)
    for name, value, unit in describe_lines(cfg, seq, args.mu, args.gamma):
        text = f"{value:.6g}" if isinstance(value, float) else str(value)
        print(f"{name:24s} {text} {unit}".rstrip())
    return EXIT_OK


# --- run ------------------------------------------------------------------

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _track_rows(frames, ground, xi, tf_radius, exclusion):
    from .analysis import background_density, detect_solitons, sound_diagnostic, track_solitons

    detected = []
    sound = []
    for snap in frames:
        bg = background_density(ground, snap.norm())
        found = detect_solitons(snap, bg, xi)
        detected.append((snap.time, found))
        sound.append(sound_diagnostic(snap, bg, found, exclusion, xi, tf_radius))
    rows = []
    if len(detected) >= 2:
        track = track_solitons(detected, max_jump=10 * xi)
        sound_at = dict(zip([t for t, _ in detected], sound))
        for sid, tr in enumerate(track.trajectories):
            for t, d in zip(tr.times, tr.detections):
                rows.append((t, sid, d.position * 1e6, d.fwhm * 1e6, d.depth, d.phase_step,
                             sound_at[t]))
    else:
        track = None
        for (t, found), amp in zip(detected, sound):
            for sid, d in enumerate(found):
                rows.append((t, sid, d.position * 1e6, d.fwhm * 1e6, d.depth, d.phase_step, amp))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows, track


TRACK_COLUMNS = ("time_s", "soliton_id", "position_um", "fwhm_um", "depth", "phase_step_rad",
                 "sound_amp")


def write_tracks(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACK_COLUMNS)
        for r in rows:
            w.writerow([f"{r[0]:.9g}", r[1]] + [f"{x:.6g}" for x in r[2:]])


def single_soliton_checks(cfg, sequence, ground, scales, result, frames):
    """(name, value, target, passed) rows for the single-soliton numbers."""
    from .analysis import background_density, detect_solitons, measure_slice_sharpness
    from .protocol import inner_edge

    p = sequence.pulses[0]
    xi = scales.healing_length
    rows = [("t_p [us]", p.duration * 1e6, "110.4 +- 0.1%",
             abs(p.duration - 110.4e-6) <= 0.001 * 110.4e-6),
            ("dB/dz [G/cm]", p.gradient, "237.5 +- 0.5%", abs(p.gradient - 237.5) <= 0.005 * 237.5)]
    sharp = measure_slice_sharpness(result.after_first_pulse, p, cfg.constants)
    rows.append(("delta_z [um]", sharp.sharpness * 1e6, "1.56 +- 15%",
                 abs(sharp.sharpness - 1.56e-6) <= 0.15 * 1.56e-6))
    bg = background_density(ground, result.projected.norm())
    found = detect_solitons(result.projected, bg, xi)
    edge = inner_edge(p, cfg.constants)
    if found:
        det = min(found, key=lambda d: abs(d.position - edge))
        rows.append(("phase step [rad]", det.phase_step, "pi +- 0.05",
                     abs(abs(det.phase_step) - math.pi) <= 0.05))
        rows.append(("notch FWHM [um]", det.fwhm * 1e6, "1.7 +- 15%",
                     abs(det.fwhm - 1.7e-6) <= 0.15 * 1.7e-6))
    else:
        rows.append(("notch", math.nan, "detected", False))
    removed = 1 - result.projected.norm() / result.final.norm()
    rows.append(("removed fraction", removed, "< 0.05", removed < 0.05))
    if frames and found:
        pos, depth = [], []
        z0 = det.position
        for snap in frames:
            f = detect_solitons(snap, background_density(ground, snap.norm()), xi)
            if not f:
                pos.append(math.nan)
                depth.append(0.0)
                continue
            d = min(f, key=lambda x: abs(x.position - z0))
            pos.append(d.position)
            depth.append(d.depth)
        drift = np.nanmax(np.abs(np.array(pos) - z0))
        rows.append(("max drift [um]", drift * 1e6, "< 2", bool(drift < 2e-6)))
        rows.append(("min depth", min(depth), "> 0.9", min(depth) > 0.9))
    return rows


def cmd_run(args):
    from .protocol import FreeStage, ProjectStage, run_protocol, run_sequence
    from .spinor import read_spf1, write_spf1
    from .units import derive_scales

    t_start = time.time()
    cfg = _config(args.config)
    seq, header = _sequence(args.sequence)
    terms, grid = _terms_and_grid(cfg)
    out = Path(args.out)
    (out / "snapshots").mkdir(parents=True, exist_ok=True)

    if args.ground:
        ground = read_spf1(args.ground)
        g = ground.grid
        if g.num_points != grid.num_points or not np.allclose(
                [g.z_min, g.z_max], [grid.z_min, grid.z_max], rtol=1e-12, atol=0):
            raise ConfigurationError("ground state grid does not match the configuration")
    else:
        ground, _ = _solve_ground(cfg, grid)
    write_spf1(ground, out / "ground.spf1")
    scales = derive_scales(cfg.constants, cfg.params, ground, cfg.nonlinearity())
    seq.check_timescale(scales.healing_time)

    every = args.snapshot_every_ms
    if every is None:
        every = float(header.get("snapshot_every_ms", 10.0))
    every *= 1e-3

    # coupled part first so its key states are kept, then the rest
    n_head = next((i + 1 for i, s in enumerate(seq.stages) if isinstance(s, ProjectStage)),
                  len(seq.stages))
    head = replace(seq, stages=seq.stages[:n_head])
    tail = replace(seq, stages=seq.stages[n_head:])
    result = run_protocol(head, ground, terms, cfg.stepper)
    write_spf1(result.after_first_pulse, out / "after_pulse1.spf1")
    write_spf1(result.final, out / "after_protocol.spf1")

    frames = []
    counter = [0]

    def save(snap):
        path = out / "snapshots" / f"frame_{counter[0]:05d}.spf1"
        write_spf1(snap, path)
        counter[0] += 1
        frames.append(snap)

    save(result.projected)
    if tail.stages:
        if not all(isinstance(s, FreeStage) for s in tail.stages):
            log.warning("stages after the projection are run without key-state capture")
        snaps = run_sequence(tail, result.projected, terms, cfg.stepper, every,
                             keep_snapshots=True)
        for snap in snaps[1:]:
            save(snap)

    rows, _ = _track_rows(frames, ground, scales.healing_length, scales.thomas_fermi_radius,
                          5 * scales.healing_length)
    write_tracks(out / "tracks.csv", rows)

    status = EXIT_OK
    checks = None
    if args.check == "single-soliton":
        checks = single_soliton_checks(cfg, seq, ground, scales, result, frames)
        for name, value, target, ok in checks:
            print(f"{'PASS' if ok else 'FAIL'}  {name:20s} {value:.5g}  (target {target})")
        if not all(ok for *_, ok in checks):
            status = EXIT_CHECK

    outputs = sorted(p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    manifest = {
        "code_version": _version(),
        "config": cfg.as_dict(),
        "sequence": {"path": str(args.sequence or "single_soliton.seq"),
                     "description": seq.description,
                     "stages": [s.kind for s in seq.stages],
                     "duration_s": seq.duration},
        "grid": {"num_points": grid.num_points, "z_min_m": grid.z_min, "z_max_m": grid.z_max},
        "scales": _scales_row(scales),
        "snapshot_every_s": every,
        "threads": __import__("mrcsim.dynamics", fromlist=["fft_workers"]).fft_workers(),
        "wall_time_s": time.time() - t_start,
        "checks": None if checks is None else [
            {"name": n, "value": v, "target": t, "passed": bool(ok)} for n, v, t, ok in checks],
        "outputs": {str(p.relative_to(out)): _sha256(p) for p in outputs},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=float))
    return status


# --- scan-pulse -----------------------------------------------------------

def _parse_range(text):
    try:
        a, b, n = text.split(":")
        return np.linspace(float(a), float(b), int(n))
    except ValueError:
        raise ConfigurationError(f"expected start:stop:count, got {text!r}") from None


def _scan_one(job):
    from .pulses import scan_mu

    base, mu, constants, n_steps, hold = job
    return scan_mu(base, [mu], constants, n_steps, hold)[0]


def cmd_scan_pulse(args):
    cfg = _config(args.config)
    seq, _ = _sequence(args.sequence)
    if not seq.pulses:
        raise ConfigurationError("sequence has no pulse to scan")
    base = seq.pulses[0]
    mus = _parse_range(args.mu)
    jobs = [(base, float(m), cfg.constants, args.steps, args.hold) for m in mus]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_scan_one, jobs))
    else:
        rows = [_scan_one(j) for j in jobs]
    w = csv.writer(sys.stdout)
    w.writerow(["mu", "gamma", "t_p_us", "slice_um", "fidelity"])
    for mu, gamma, tp, dz, fid in rows:
        w.writerow([f"{mu:.6g}", f"{gamma:.6g}", f"{tp * 1e6:.6g}", f"{dz * 1e6:.6g}",
                    f"{fid:.8f}"])
    return EXIT_OK


# --- analyze --------------------------------------------------------------

def cmd_analyze(args):
    from .spinor import read_spf1
    from .units import derive_scales

    cfg = _config(args.config)
    ground = read_spf1(args.ground)
    scales = derive_scales(cfg.constants, cfg.params, ground, cfg.nonlinearity())
    files = sorted(Path(args.input).glob("*.spf1"))
    if not files:
        raise ConfigurationError(f"no .spf1 snapshots in {args.input}")
    frames = sorted((read_spf1(f) for f in files), key=lambda s: s.time)
    rows, _ = _track_rows(frames, ground, scales.healing_length, scales.thomas_fermi_radius,
                          args.exclusion_xi * scales.healing_length)
    write_tracks(args.out, rows)
    print(f"{len(frames)} frames, {len(rows)} detections -> {args.out}")
    return EXIT_OK


# --- entry point ----------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="mrcsim", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    cfg_help = "flat key = value config (default: packaged rb87.cfg)"
    seq_help = "recipe .seq file or packaged recipe name (default: single_soliton.seq)"

    p = sub.add_parser("groundstate", help="solve the m = -1 ground state")
    p.add_argument("--config", help=cfg_help)
    p.add_argument("--out", required=True, help="output SPF1 file")
    p.set_defaults(func=cmd_groundstate)

    p = sub.add_parser("describe", help="print derived scales and pulse geometry")
    p.add_argument("--config", help=cfg_help)
    p.add_argument("--sequence", help=seq_help)
    p.add_argument("--mu", type=float, help="override mu of the first pulse")
    p.add_argument("--gamma", type=float, help="override Gamma of the first pulse")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("run", help="run a recipe and analyse it")
    p.add_argument("--config", help=cfg_help)
    p.add_argument("--sequence", help=seq_help)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--ground", help="reuse a ground state SPF1 instead of solving")
    p.add_argument("--snapshot-every-ms", type=float,
                   help="snapshot cadence during free evolution (default from recipe or 10)")
    p.add_argument("--check", choices=["single-soliton"], help="verify the single-soliton numbers")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("scan-pulse", help="point-model fidelity over a range of mu")
    p.add_argument("--config", help=cfg_help)
    p.add_argument("--sequence", help=seq_help + "; its first pulse is the base")
    p.add_argument("--mu", required=True, help="start:stop:count")
    p.add_argument("--hold", choices=["beta", "gamma"], default="beta",
                   help="keep mu*Gamma (beta) or Gamma fixed")
    p.add_argument("--steps", type=int, default=50_000, help="point-model time steps")
    p.add_argument("--jobs", type=int, default=1, help="parallel processes")
    p.set_defaults(func=cmd_scan_pulse)

    p = sub.add_parser("analyze", help="track solitons in a snapshot directory")
    p.add_argument("--in", dest="input", required=True, help="directory of SPF1 snapshots")
    p.add_argument("--ground", required=True, help="ground state SPF1")
    p.add_argument("--config", help=cfg_help)
    p.add_argument("--out", default="tracks.csv", help="output CSV")
    p.add_argument("--exclusion-xi", type=float, default=5.0,
                   help="sound exclusion radius around solitons, in healing lengths")
    p.set_defaults(func=cmd_analyze)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (MRCError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
