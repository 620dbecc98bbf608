import json
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from robust_indi.config import (ConfigError, ProjectConfig, config_from_dict, load_config,
                                with_overrides)

DEFAULT = Path(__file__).resolve().parents[1] / "configs" / "default.json"


def test_shipped_default_matches_builtin():
    assert load_config(DEFAULT) == ProjectConfig()


def test_minimal_document():
    assert config_from_dict({"schema_version": 1}) == ProjectConfig()


def test_to_dict_round_trip():
    cfg = config_from_dict({"schema_version": 1, "plant": {"tau": 0.03, "inertia": [1, 2, 3]}})
    assert config_from_dict(cfg.to_dict()) == cfg
    assert cfg.plant.inertia == (1, 2, 3)


@pytest.mark.parametrize("doc, field", [
    ({}, "schema_version"),
    ({"schema_version": 2}, "schema_version"),
    ({"schema_version": 1, "plant": {"tau": -0.01}}, "plant.tau"),
    ({"schema_version": 1, "plant": {"colour": "red"}}, "plant.colour"),
    ({"schema_version": 1, "extras": {}}, "extras"),
    ({"schema_version": 1, "weights": {"M_S_db": "six"}}, "weights.M_S_db"),
    ({"schema_version": 1, "schedule": {"n_points": 1}}, "schedule.n_points"),
    ({"schema_version": 1, "schedule": {"tau_min": 0.09}}, "schedule.tau_min"),
    ({"schema_version": 1, "sim": {"amplitude_deg": 90}}, "sim.amplitude_deg"),
])
def test_errors_name_the_field(doc, field):
    with pytest.raises(ConfigError) as err:
        config_from_dict(doc)
    assert err.value.field == field
    assert str(err.value).startswith(field)


def test_cross_field_check():
    with pytest.raises(ConfigError, match="0 < A_M < M_M") as err:
        config_from_dict({"schema_version": 1, "weights": {"A_M_db": -10, "M_M_db": -20}})
    assert err.value.field == "weights"


def test_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"schema_version": 1,')
    with pytest.raises(ConfigError, match="line 1"):
        load_config(p)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="no such file"):
        load_config(tmp_path / "nope.json")


@given(seed=st.integers(0, 2 ** 31))
def test_seed_override_sets_every_seed(seed):
    s = with_overrides(ProjectConfig(), seed=seed).seeds
    assert (s.synthesis, s.analysis, s.montecarlo, s.noise) == (seed,) * 4


def test_sample_override():
    assert with_overrides(ProjectConfig(), samples=7).montecarlo.n_random == 7
    with pytest.raises(ConfigError):
        with_overrides(ProjectConfig(), samples=0)


def test_derived_objects():
    cfg = ProjectConfig()
    assert cfg.quadrotor().tau == 0.017
    assert cfg.weight_config().M_S == pytest.approx(10 ** (6 / 20))
    sim = cfg.sim_config(0.05)
    assert sim.params.tau == 0.05 and sim.params.axes == "rpy"
    assert json.loads(json.dumps(cfg.to_dict()))["schema_version"] == 1
