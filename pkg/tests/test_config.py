import math

import pytest

from mrcsim.config import OPTIONAL, REQUIRED, load_config, parse_config
from mrcsim.errors import ConfigurationError
from mrcsim.protocol import recipe_path

BASE = recipe_path("rb87.cfg").read_text()


def test_packaged_config_values():
    cfg = load_config(recipe_path("rb87.cfg"))
    assert cfg.params.atom_number == 10_000
    assert cfg.params.axial_freq == 2.4 and cfg.params.radial_freq == 158.4
    assert cfg.constants.scattering_length == pytest.approx(5.3e-9)
    assert cfg.constants.gyromagnetic_ratio == pytest.approx(2 * math.pi * 0.70e6)
    assert cfg.stepper.dt_pulse == pytest.approx(2e-9)
    assert cfg.nonlinearity_model == "effective-1d"


def test_as_dict_is_si_and_complete():
    d = load_config(recipe_path("rb87.cfg")).as_dict()
    assert d["scattering_length_m"] == pytest.approx(5.3e-9)
    assert d["dt_free_s"] == pytest.approx(1e-6)
    assert d["atoms"] == 10_000


def test_optional_overrides():
    cfg = parse_config(BASE + "dt_pulse_ns = 1\nnonlinearity = plain-cubic\n")
    assert cfg.stepper.dt_pulse == pytest.approx(1e-9)
    assert cfg.nonlinearity_model == "plain-cubic"


@pytest.mark.parametrize("key", REQUIRED)
def test_missing_required_key(key):
    text = "\n".join(l for l in BASE.splitlines() if not l.startswith(key))
    with pytest.raises(ConfigurationError, match=f"missing required key '{key}'"):
        parse_config(text)


@pytest.mark.parametrize("extra,needle", [
    ("colour = red", "unknown key"),
    ("atoms = 5", "duplicate key"),
    ("dt_pulse_ns = fast", "not a number"),
    ("dt_pulse_ns = nan", "finite"),
    ("nonlinearity = quintic", "nonlinearity"),
    ("ground_tolerance = 0", "ground_tolerance"),
    ("just words", "key = value"),
])
def test_bad_entries(extra, needle):
    with pytest.raises(ConfigurationError, match=needle):
        parse_config(BASE + extra + "\n")


@pytest.mark.parametrize("old,new,needle", [
    ("atoms = 10000", "atoms = -3", "non-negative integer"),
    ("atoms = 10000", "atoms = 2.5", "non-negative integer"),
    ("grid_points_per_xi = 4", "grid_points_per_xi = 3", "at least 4"),
    ("grid_padding = 1.4", "grid_padding = 1.2", "at least 1.4"),
    ("f_z_hz = 2.4", "f_z_hz = -1", "trap frequencies"),
])
def test_out_of_range(old, new, needle):
    with pytest.raises(ConfigurationError, match=needle):
        parse_config(BASE.replace(old, new))


def test_zero_atoms_is_allowed():
    assert parse_config(BASE.replace("atoms = 10000", "atoms = 0")).params.atom_number == 0


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigurationError, match="cannot read"):
        load_config(tmp_path / "missing.cfg")


def test_optional_defaults_parse():
    assert set(OPTIONAL) >= {"dt_pulse_ns", "dt_free_us", "nonlinearity"}
