"""
Helper functions for antipt_spdc.

Unit parsing for configuration values, deterministic float formatting for
CSV output and the configuration hash embedded in every output file.
"""

import hashlib
import json
import math
import re
from typing import Dict, Mapping

# Conversion factors to SI, grouped by dimension
LENGTH_UNITS: Dict[str, float] = {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "nm": 1e-9}
RATE_UNITS: Dict[str, float] = {"m^-1": 1.0, "cm^-1": 1e2, "mm^-1": 1e3}
POWER_UNITS: Dict[str, float] = {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "nW": 1e-9}
NONLINEAR_UNITS: Dict[str, float] = {"m/V": 1.0, "pm/V": 1e-12}
AREA_UNITS: Dict[str, float] = {"m^2": 1.0, "um^2": 1e-12}

DIMENSIONS: Dict[str, Dict[str, float]] = {
    "length": LENGTH_UNITS,
    "rate": RATE_UNITS,
    "power": POWER_UNITS,
    "nonlinear": NONLINEAR_UNITS,
    "area": AREA_UNITS,
}

_QUANTITY_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z^/0-9\-]+)\s*$")
_ANGLE_RE = re.compile(
    r"^\s*(?:([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*\*?\s*)?(-?)pi\s*(?:/\s*(\d+\.?\d*))?\s*$"
)


def parse_quantity(text: object, dimension: str) -> float:
    """
    Parses a value with an explicit unit suffix and returns it in SI units.

    Args:
        text (object): String such as "7.22 cm^-1" or "4 mm".
        dimension (str): One of "length", "rate", "power", "nonlinear", "area".

    Returns:
        float: Value in SI units.

    Raises:
        ValueError: If the unit is missing or does not belong to the dimension.
    """
    units = DIMENSIONS[dimension]
    if not isinstance(text, str):
        raise ValueError(f"{dimension} value {text!r} needs a unit suffix ({', '.join(units)})")
    match = _QUANTITY_RE.match(text)
    if not match:
        raise ValueError(f"cannot parse {text!r} as a {dimension} with unit")
    number, unit = match.groups()
    if unit not in units:
        raise ValueError(f"unit {unit!r} is not a {dimension} unit ({', '.join(units)})")
    return float(number) * units[unit]


def parse_angle(text: object) -> float:
    """
    Parses an angle in radians; accepts plain numbers and forms like "pi/2" or "0.5 pi".
    """
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return float(text)
    if not isinstance(text, str):
        raise ValueError(f"cannot parse {text!r} as an angle")
    try:
        return float(text)
    except ValueError:
        pass
    match = _ANGLE_RE.match(text)
    if not match:
        raise ValueError(f"cannot parse {text!r} as an angle")
    factor, minus, divisor = match.groups()
    value = (float(factor) if factor else 1.0) * math.pi
    if minus:
        value = -value
    if divisor:
        value /= float(divisor)
    return value


def per_m_to_per_cm(rate: float) -> float:
    """Converts a rate from m^-1 to cm^-1."""
    return rate / 100.0


def per_cm_to_per_m(rate: float) -> float:
    """Converts a rate from cm^-1 to m^-1."""
    return rate * 100.0


def wrap_phase(theta: float) -> float:
    """Wraps a phase into [0, 2*pi)."""
    wrapped = math.fmod(theta, 2.0 * math.pi)
    if wrapped < 0.0:
        wrapped += 2.0 * math.pi
    # fmod of values just below a multiple of 2*pi can round up to 2*pi
    return 0.0 if wrapped >= 2.0 * math.pi else wrapped


def format_float(value: float) -> str:
    """Formats a float with 17 significant digits for reproducible CSV output."""
    return f"{value:.17g}"


def config_hash(config: Mapping[str, object]) -> str:
    """
    Computes the SHA-256 hash of a configuration mapping.

    Args:
        config (Mapping[str, object]): JSON-serializable configuration.

    Returns:
        str: Hex digest of the canonical JSON encoding.
    """
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
