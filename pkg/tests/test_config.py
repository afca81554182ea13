import math

import pytest

from logic.config import ConfigError, config_hash, dump_config, parse_config
from logic.data_loader import list_scenarios, load_config, resolve_scenario


def test_minimal_config_uses_defaults(minimal_config_text):
    config = parse_config(minimal_config_text)
    params = config.params
    assert (params.hbar, params.D, params.A_coef, params.B_coef) == (0.1, 1e-3, 10.0, 0.5)
    assert config.grid.shape == (512, 512)
    assert config.modes == ("quantum", "classical")
    assert config.t_end == pytest.approx(149 * params.drive_period)
    assert config.t_max_manifold == pytest.approx(3 * params.drive_period)
    specs = config.initial_specs()
    assert [s.center for s in specs] == [(-1.0, 0.0), (1.0, 0.0)]
    assert all(s.is_minimum_uncertainty(0.1) for s in specs)


def test_measurement_strength_sets_d(minimal_config_text):
    config = parse_config("[model]\nk_meas = 0.5\n" + minimal_config_text)
    assert config.params.D == pytest.approx(0.1 ** 2 * 0.5)


def test_bad_value_names_its_line(minimal_config_text):
    with pytest.raises(ConfigError) as info:
        parse_config("[model]\nhbar = -1\n" + minimal_config_text)
    issues = info.value.issues
    assert (2, "model.hbar") in [(i.line, i.key) for i in issues]
    assert "line 2: model.hbar" in str(info.value)


def test_every_problem_is_reported():
    text = "\n".join([
        "stray = 1",
        "[model]",
        "hbar = abc",
        "planck = 1",
        "[grid]",
        "nq = 500",
        "[run]",
        "dt = 1e-3",
        "dt = 2e-3",
        "[extras]",
        "colour = blue",
    ])
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    keys = {i.key for i in info.value.issues}
    assert {"stray", "model.hbar", "model.planck", "grid.nq", "run.dt", "[extras]",
            "run.output_dir"} <= keys
    lines = {i.key: i.line for i in info.value.issues}
    assert lines["model.planck"] == 4
    assert lines["grid.nq"] == 6
    assert lines["run.output_dir"] is None


def test_mutually_exclusive_end_times(minimal_config_text):
    with pytest.raises(ConfigError) as info:
        parse_config(minimal_config_text + "t_end = 5\nt_end_periods = 3\n")
    assert [i.key for i in info.value.issues] == ["run.t_end_periods"]


def test_initial_state_must_fit_the_box(minimal_config_text):
    with pytest.raises(ConfigError) as info:
        parse_config("[initial]\nq_a = -7.5\n" + minimal_config_text)
    assert info.value.issues[0].key == "initial.q_a"


CLASSICAL_BLOB = "[initial]\nkind = gaussian\nsigma_q = 0.3\nsigma_p = 0.3\n"


def test_classical_only_allows_zero_hbar(minimal_config_text):
    config = parse_config("[model]\nhbar = 0\n" + CLASSICAL_BLOB + minimal_config_text + "mode = classical\n")
    assert config.modes == ("classical",)
    with pytest.raises(ConfigError):
        parse_config("[model]\nhbar = 0\n" + minimal_config_text)


def test_zero_hbar_needs_an_explicit_gaussian(minimal_config_text):
    with pytest.raises(ConfigError) as info:
        parse_config("[model]\nhbar = 0\n" + minimal_config_text + "mode = classical\n")
    keys = [i.key for i in info.value.issues]
    assert "initial.kind" in keys
    assert {"initial.sigma_q", "initial.sigma_p"} <= set(keys)


def test_widths_below_the_uncertainty_limit(minimal_config_text):
    narrow = "[initial]\nkind = gaussian\nsigma_q = 0.05\nsigma_p = 0.05\n"
    with pytest.raises(ConfigError) as info:
        parse_config(narrow + minimal_config_text + "mode = quantum\n")
    assert [i.key for i in info.value.issues] == ["initial.sigma_q"]
    assert parse_config(narrow + minimal_config_text + "mode = classical\n").modes == ("classical",)


def test_cat_lobes_must_be_minimum_uncertainty(minimal_config_text):
    wide = "[initial]\nsigma_q = 0.3\nsigma_p = 0.3\n"
    with pytest.raises(ConfigError) as info:
        parse_config(wide + minimal_config_text)
    assert [i.key for i in info.value.issues] == ["initial.sigma_p"]


def test_checkpoint_schedule(minimal_config_text):
    config = parse_config(minimal_config_text + "t_end = 1\ncheckpoint_every = 0.3\n")
    assert config.checkpoint_schedule() == pytest.approx([0.3, 0.6, 0.9, 1.0])
    explicit = config.replace("run", checkpoint_every=None, checkpoint_times=(0.5, 0.1, 7.0))
    assert explicit.checkpoint_schedule() == pytest.approx([0.1, 0.5, 1.0])
    with pytest.raises(KeyError):
        config.replace("run", colour="blue")


def test_dump_round_trip_and_hash(minimal_config_text):
    config = parse_config(minimal_config_text + "dt = 0.1\ncheckpoint_times = 0.1, 0.30000000000000004\n")
    text = dump_config(config)
    again = parse_config(text)
    assert again.values == config.values
    assert dump_config(again) == text
    assert config_hash(again) == config_hash(config)
    assert config_hash(config.replace("run", seed=1)) != config_hash(config)
    assert "D =" not in text


def test_scenarios_parse():
    names = list_scenarios()
    assert "duffing_d1e-3" in names
    for name in names:
        config = load_config(name)
        assert config.output_dir.startswith("runs/")
    full_scale = load_config("duffing_d1e-3")
    assert full_scale.grid.shape == (4096, 4096)
    assert full_scale.t_end == pytest.approx(149 * 2 * math.pi / 6.07)


def test_resolve_scenario(tmp_path, minimal_config_text):
    path = tmp_path / "mine.cfg"
    path.write_text(minimal_config_text)
    assert resolve_scenario(path) == path
    assert resolve_scenario("duffing_d1e-2.cfg").name == "duffing_d1e-2.cfg"
    with pytest.raises(FileNotFoundError):
        resolve_scenario("no_such_scenario")
