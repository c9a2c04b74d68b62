import math

import pytest

from antipt_spdc.helpers import (
    config_hash,
    format_float,
    parse_angle,
    parse_quantity,
    per_cm_to_per_m,
    per_m_to_per_cm,
    wrap_phase,
)


@pytest.mark.parametrize(
    "text, dimension, expected",
    [
        ("4 mm", "length", 4e-3),
        ("205um", "length", 205e-6),
        ("7.22 cm^-1", "rate", 722.0),
        ("6.93 m^-1", "rate", 6.93),
        ("4 mW", "power", 4e-3),
        ("17.19 pm/V", "nonlinear", 17.19e-12),
        ("1.11 um^2", "area", 1.11e-12),
        ("1e-3 m", "length", 1e-3),
    ],
)
def test_parse_quantity(text, dimension, expected):
    assert parse_quantity(text, dimension) == pytest.approx(expected, rel=1e-12)


def test_parse_quantity_needs_unit():
    with pytest.raises(ValueError, match="unit suffix"):
        parse_quantity(4.0, "length")


def test_parse_quantity_rejects_wrong_dimension():
    with pytest.raises(ValueError, match="not a rate unit"):
        parse_quantity("4 mm", "rate")


@pytest.mark.parametrize(
    "text, expected",
    [(0, 0.0), ("1.5", 1.5), ("pi", math.pi), ("pi/2", math.pi / 2), ("0.5 pi", math.pi / 2), ("2*pi", 2 * math.pi),
     ("-pi", -math.pi)],
)
def test_parse_angle(text, expected):
    assert parse_angle(text) == pytest.approx(expected, rel=1e-15)


def test_parse_angle_rejects_garbage():
    with pytest.raises(ValueError):
        parse_angle("half a turn")


def test_rate_conversion():
    assert per_m_to_per_cm(722.0) == pytest.approx(7.22)
    assert per_cm_to_per_m(76.62) == pytest.approx(7662.0)


@pytest.mark.parametrize("theta, expected", [(0.0, 0.0), (-math.pi / 2, 1.5 * math.pi), (2 * math.pi, 0.0),
                                             (5 * math.pi, math.pi)])
def test_wrap_phase(theta, expected):
    assert wrap_phase(theta) == pytest.approx(expected, abs=1e-12)
    assert 0.0 <= wrap_phase(theta) < 2 * math.pi


def test_format_float_keeps_full_precision():
    assert float(format_float(0.1 + 0.2)) == 0.1 + 0.2


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
