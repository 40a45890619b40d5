import csv
import json
import math

import numpy as np
import pytest

from mrcsim.cli import EXIT_CONFIG, build_parser, main
from mrcsim.protocol import recipe_path
from mrcsim.spinor import SpinorField, read_spf1, write_spf1
from mrcsim.units import Grid

BASE = recipe_path("rb87.cfg").read_text()

SHORT = """description = short single-soliton check
snapshot_every_ms = 0.5

stage = pulse
rabi_khz = 300
mu = 3.2
gamma = 5
alpha = 0.003
delta1_khz = 960
gradient_g_per_cm = -237.5

stage = wait
detuning_khz = 78.4
duration_us = 5

stage = pulse
rabi_khz = 300
mu = 3.2
gamma = 5
alpha = 0.003
delta1_khz = 960
gradient_g_per_cm = 237.5
sweep = reverse

stage = project
keep = -1

stage = free
duration_ms = 1
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(BASE.replace("atoms = 10000", "atoms = 300"))
    return path


def test_parser_has_all_commands():
    sub = build_parser()._subparsers._group_actions[0].choices
    assert set(sub) == {"groundstate", "describe", "run", "scan-pulse", "analyze"}


def test_describe_default(capsys):
    assert main(["describe"]) == 0
    out = capsys.readouterr().out
    rows = {line[:24].strip(): line[24:].split()[0] for line in out.splitlines()}
    assert float(rows["t_p"]) == pytest.approx(110.386, abs=1e-3)
    assert float(rows["dB/dz"]) == pytest.approx(237.5)
    assert float(rows["xi"]) == pytest.approx(505, rel=0.01)
    assert float(rows["coupled time"]) == pytest.approx(225.8, abs=0.1)


def test_describe_override(capsys):
    assert main(["describe", "--sequence", "double_soliton_a.seq", "--mu", "1.0",
                 "--gamma", "16"]) == 0
    out = capsys.readouterr().out
    rows = {line[:24].strip(): line[24:].split()[0] for line in out.splitlines()}
    assert float(rows["Delta0/2pi"]) == pytest.approx(300.0)


def test_describe_without_atoms(tmp_path, capsys):
    cfg = tmp_path / "empty.cfg"
    cfg.write_text(BASE.replace("atoms = 10000", "atoms = 0"))
    assert main(["describe", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "unavailable (linear regime)" in out
    assert "t_p" in out


def test_missing_key_exits_with_config_code(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(BASE.replace("f_r_hz = 158.4\n", ""))
    assert main(["describe", "--config", str(cfg)]) == EXIT_CONFIG
    assert "f_r_hz" in capsys.readouterr().err


def test_missing_recipe_exits_with_config_code(capsys):
    assert main(["describe", "--sequence", "no_such_recipe.seq"]) == EXIT_CONFIG


def test_run_without_atoms_is_a_config_error(tmp_path):
    cfg = tmp_path / "empty.cfg"
    cfg.write_text(BASE.replace("atoms = 10000", "atoms = 0"))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_scan_pulse(capsys):
    assert main(["scan-pulse", "--mu", "1.6:3.2:2", "--steps", "5000"]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert [float(r["mu"]) for r in rows] == [1.6, 3.2]
    assert float(rows[0]["gamma"]) == pytest.approx(10.0)
    assert float(rows[0]["t_p_us"]) == pytest.approx(float(rows[1]["t_p_us"]))
    assert float(rows[1]["fidelity"]) > 0.99


def test_scan_pulse_bad_range():
    assert main(["scan-pulse", "--mu", "1:2"]) == EXIT_CONFIG


def test_groundstate(tmp_path, small_cfg, capsys):
    out = tmp_path / "g.spf1"
    assert main(["groundstate", "--config", str(small_cfg), "--out", str(out)]) == 0
    state = read_spf1(out)
    assert state.norm() == pytest.approx(1.0, abs=1e-9)
    row = next(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert float(row["xi_m"]) == pytest.approx(1.02e-6, rel=0.02)


def test_run_writes_outputs(tmp_path, small_cfg):
    seq = tmp_path / "short.seq"
    seq.write_text(SHORT)
    out = tmp_path / "run"
    assert main(["run", "--config", str(small_cfg), "--sequence", str(seq),
                 "--out", str(out)]) == 0
    for name in ("ground.spf1", "after_pulse1.spf1", "after_protocol.spf1", "tracks.csv",
                 "manifest.json"):
        assert (out / name).is_file()
    frames = sorted((out / "snapshots").glob("frame_*.spf1"))
    assert len(frames) == 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["sequence"]["stages"] == ["pulse", "wait", "pulse", "project", "free"]
    assert manifest["config"]["atoms"] == 300
    assert set(manifest["outputs"]) >= {"ground.spf1", "tracks.csv"}
    assert all(len(h) == 64 for h in manifest["outputs"].values())
    # the projected state keeps the m = -1 row only
    first = read_spf1(frames[0])
    assert np.all(first.amplitudes[1:] == 0)

    # a second run can reuse the ground state
    again = tmp_path / "again"
    assert main(["run", "--config", str(small_cfg), "--sequence", str(seq),
                 "--out", str(again), "--ground", str(out / "ground.spf1")]) == 0


def test_run_rejects_mismatched_ground(tmp_path, small_cfg):
    g = Grid.symmetric(64, 10e-6)
    write_spf1(SpinorField.from_component(g, np.ones(64) / math.sqrt(20e-6)), tmp_path / "g.spf1")
    assert main(["run", "--config", str(small_cfg), "--out", str(tmp_path / "o"),
                 "--ground", str(tmp_path / "g.spf1")]) == EXIT_CONFIG


def test_analyze_synthetic_snapshots(tmp_path, capsys):
    # a Thomas-Fermi-like background with one black soliton moving at constant speed
    grid = Grid.symmetric(4096, 134e-6)
    z = grid.z
    xi = 505e-9
    bg = np.sqrt(np.clip(1 - (z / 96e-6) ** 2, 0, None)).astype(complex)
    bg /= math.sqrt(np.sum(np.abs(bg) ** 2) * grid.dz)
    ground = SpinorField.from_component(grid, bg)
    write_spf1(ground, tmp_path / "ground.spf1")
    snaps = tmp_path / "snaps"
    snaps.mkdir()
    for k in range(4):
        z0 = -5e-6 + k * 1e-6
        psi = bg * np.tanh((z - z0) / (math.sqrt(2) * xi))
        s = SpinorField.from_component(grid, psi, time=k * 1e-3)
        write_spf1(s, snaps / f"frame_{k:05d}.spf1")
    out = tmp_path / "tracks.csv"
    assert main(["analyze", "--in", str(snaps), "--ground", str(tmp_path / "ground.spf1"),
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert len(rows) == 4
    assert {r["soliton_id"] for r in rows} == {"0"}
    pos = [float(r["position_um"]) for r in rows]
    assert pos == pytest.approx([-5, -4, -3, -2], abs=0.1)
    assert all(abs(abs(float(r["phase_step_rad"])) - math.pi) < 0.05 for r in rows)


def test_analyze_empty_directory(tmp_path):
    (tmp_path / "g").mkdir()
    write_spf1(SpinorField.from_component(Grid.symmetric(64, 10e-6), np.ones(64) / math.sqrt(20e-6)),
               tmp_path / "g.spf1")
    assert main(["analyze", "--in", str(tmp_path / "g"), "--ground",
                 str(tmp_path / "g.spf1")]) == EXIT_CONFIG
