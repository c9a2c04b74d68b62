import math
import textwrap

import pytest

from antipt_spdc.config import RunConfig, apply_mapping, load_config, parse_theta_grid
from antipt_spdc.enums import Engine, Scheme
from antipt_spdc.exceptions import ConfigError


def _write(tmp_path, text):
    path = tmp_path / "run.yaml"
    path.write_text(textwrap.dedent(text).lstrip())
    return str(path)


def test_defaults_validate():
    config = RunConfig()
    config.validate()
    params = config.model_params()
    assert params.theta == 0.0
    assert params.scheme is Scheme.ANTIPT_MASTER


def test_load_config_with_units(tmp_path):
    path = _write(
        tmp_path,
        """
        model:
          scheme: coherent
          g_eps: 6.93 m^-1
          gamma: 7.22 cm^-1
        phase:
          theta: pi/2
        propagation:
          length: 4 mm
          samples: 11
        truncation:
          per_mode_cap: 3
          total_cap: 4
        run:
          engine: gaussian
          workers: 2
        design:
          pump_power: 2 mW
          d_eff: 17.19 pm/V
        """,
    )
    config = load_config(path)
    config.validate()
    assert config.scheme is Scheme.COHERENT
    assert config.engine is Engine.GAUSSIAN
    assert config.gamma == pytest.approx(722.0)
    assert config.theta == pytest.approx(math.pi / 2)
    assert config.length == pytest.approx(4e-3)
    assert (config.samples, config.per_mode_cap, config.total_cap) == (11, 3, 4)
    assert config.workers == 2
    assert config.design.pump_power == pytest.approx(2e-3)
    assert config.design.d_eff == pytest.approx(17.19e-12)


def test_theta_grid_mapping(tmp_path):
    path = _write(
        tmp_path,
        """
        phase:
          theta_grid: {start: 0, stop: pi, points: 5}
        """,
    )
    config = load_config(path)
    config.validate()
    assert config.theta is None
    assert config.theta_grid == pytest.approx((0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4, math.pi))


def test_parse_theta_grid_forms():
    assert parse_theta_grid([0, "pi", "0.5 pi"]) == pytest.approx((0.0, math.pi, math.pi / 2))
    assert len(parse_theta_grid({})) == 33
    with pytest.raises(ValueError):
        parse_theta_grid({"start": 0, "steps": 3})
    with pytest.raises(ValueError):
        parse_theta_grid("0:1:3")


def test_theta_and_grid_are_exclusive(tmp_path):
    path = _write(
        tmp_path,
        """
        phase:
          theta: 0.5
          theta_grid: [0, 1]
        """,
    )
    with pytest.raises(ConfigError, match="mutually exclusive"):
        load_config(path)


def test_unknown_key_names_its_line(tmp_path):
    path = _write(
        tmp_path,
        """
        model:
          gamma: 7.22 cm^-1
          bogus: 1
        """,
    )
    with pytest.raises(ConfigError, match=r"run\.yaml:3: model\.bogus: unknown key"):
        load_config(path)


def test_unknown_section(tmp_path):
    path = _write(tmp_path, "physics:\n  gamma: 1 m^-1\n")
    with pytest.raises(ConfigError, match="unknown section"):
        load_config(path)


def test_rate_needs_a_unit(tmp_path):
    path = _write(tmp_path, "model:\n  gamma: 722\n")
    with pytest.raises(ConfigError, match="needs a unit suffix"):
        load_config(path)


def test_invalid_yaml(tmp_path):
    path = _write(tmp_path, "model: [unclosed\n")
    with pytest.raises(ConfigError, match="invalid YAML"):
        load_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.yaml"))


def test_three_mode_needs_reservoir_rates():
    config = RunConfig()
    config.set_scheme("three_mode")
    with pytest.raises(ConfigError, match="kappa and gamma_c"):
        config.validate()
    config.set_rate("kappa", 7662.0)
    config.set_rate("gamma_c", 81300.0)
    config.validate()


def test_setters_validate():
    config = RunConfig()
    with pytest.raises(ValueError):
        config.set_workers(0)
    with pytest.raises(ValueError):
        config.set_rate("gamma", -1.0)
    with pytest.raises(ValueError):
        config.set_scheme("pt")
    with pytest.raises(ValueError):
        config.set_propagation(1e-3, 1)
    with pytest.raises(ValueError):
        config.set_truncation(21, None)


def test_set_theta_clears_grid():
    config = RunConfig()
    config.set_theta_grid([0.0, 1.0])
    assert config.theta is None
    config.set_theta(2.0)
    assert config.theta_grid is None


def test_config_hash():
    base = RunConfig()
    other = RunConfig()
    other.set_workers(8)
    assert base.config_hash() == other.config_hash()
    other.set_rate("gamma", 700.0)
    assert base.config_hash() != other.config_hash()
    assert len(base.config_hash()) == 64


def test_apply_mapping_reports_source():
    with pytest.raises(ConfigError, match="^cli: run.engine"):
        apply_mapping(RunConfig(), {"run": {"engine": "rk4"}}, source="cli")


def test_model_params_wraps_value_errors():
    config = RunConfig()
    config.set_truncation(2, 2)
    config.set_scheme("three_mode")
    with pytest.raises(ConfigError):
        config.model_params()


def test_waveguide_design_leaves_config_untouched(tmp_path):
    path = tmp_path / "field.txt"
    path.write_text("2 2 1e-6 1e-6\n1 0.5\n0.5 0.25\n")
    config = RunConfig()
    config.field_omega_path = str(path)
    config.field_2omega_path = str(path)
    first = config.waveguide_design()
    second = config.waveguide_design()
    assert first is not config.design
    assert first is not second
    assert first.field_omega.shape == (2, 2)
    assert config.design.field_omega is None
    assert config.design.field_2omega is None
