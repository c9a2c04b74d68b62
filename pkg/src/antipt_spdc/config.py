"""
Run configuration.

This module defines the RunConfig dataclass, which collects everything a
command needs (model, phase, propagation, truncation, run and design
settings), and loads it from YAML files with physical quantities written
with explicit unit suffixes. Validation errors from a file name the line
of the offending key.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from antipt_spdc.design import WaveguideDesign, load_field_grid
from antipt_spdc.enums import Engine, Scheme
from antipt_spdc.exceptions import ConfigError
from antipt_spdc.helpers import config_hash, parse_angle, parse_quantity
from antipt_spdc.model import (
    DEFAULT_PER_MODE_CAP,
    DEFAULT_SAMPLES,
    DEFAULT_TOTAL_CAP,
    REFERENCE_G_EPS,
    REFERENCE_GAMMA,
    REFERENCE_LENGTH,
    ModelParams,
)

logger = logging.getLogger(__name__)

MAX_WORKERS = 256
MAX_CAP = 20

# Reference SHG measurement
REFERENCE_P_FUND_IN = 2.8e-3
REFERENCE_P_SHG_OUT = 1.74e-5
REFERENCE_SHG_LENGTH = 4e-3

_SECTIONS = ("model", "phase", "propagation", "truncation", "run", "design")


@dataclass
class RunConfig:
    """
    Settings of one command invocation.

    Attributes:
        scheme (Scheme): Physical model.
        g_eps (float): Pair-generation strength (m^-1).
        gamma (float): Dissipative coupling Gamma (m^-1).
        kappa (Optional[float]): Hopping to the lossy waveguide (m^-1), three-mode only.
        gamma_c (Optional[float]): Loss of the lossy waveguide (m^-1), three-mode only.
        theta (Optional[float]): Single pump phase (rad).
        theta_grid (Optional[Tuple[float, ...]]): Pump phases of a sweep (rad).
        length (float): Propagation length (m).
        samples (int): Number of z samples.
        step (Optional[float]): RK4 step override (m).
        per_mode_cap (int): Fock cap per mode.
        total_cap (Optional[int]): Fock cap on the total photon number.
        engine (Engine): Solver.
        jumps (bool): Keep the jump term of the master equation.
        normalize_nhh (bool): Normalize NHH states before extracting observables.
        output_dir (str): Directory for output files.
        workers (int): Worker processes for sweeps.
        compare_engine (Optional[Engine]): Second engine reported in the sweep footer.
        design (WaveguideDesign): Design-calculator inputs.
        p_fund_in (float): SHG fundamental input power (W).
        p_shg_out (float): SHG output power (W).
        shg_length (float): SHG waveguide length (m).
        field_omega_path (Optional[str]): Fundamental field grid file.
        field_2omega_path (Optional[str]): Second-harmonic field grid file.
        calibration_csv (Optional[str]): Heater calibration samples.
    """
    scheme: Scheme = Scheme.ANTIPT_MASTER
    g_eps: float = REFERENCE_G_EPS
    gamma: float = REFERENCE_GAMMA
    kappa: Optional[float] = None
    gamma_c: Optional[float] = None
    theta: Optional[float] = 0.0
    theta_grid: Optional[Tuple[float, ...]] = None
    length: float = REFERENCE_LENGTH
    samples: int = DEFAULT_SAMPLES
    step: Optional[float] = None
    per_mode_cap: int = DEFAULT_PER_MODE_CAP
    total_cap: Optional[int] = DEFAULT_TOTAL_CAP
    engine: Engine = Engine.ME
    jumps: bool = True
    normalize_nhh: bool = False
    output_dir: str = "."
    workers: int = 1
    compare_engine: Optional[Engine] = None
    design: WaveguideDesign = field(default_factory=WaveguideDesign)
    p_fund_in: float = REFERENCE_P_FUND_IN
    p_shg_out: float = REFERENCE_P_SHG_OUT
    shg_length: float = REFERENCE_SHG_LENGTH
    field_omega_path: Optional[str] = None
    field_2omega_path: Optional[str] = None
    calibration_csv: Optional[str] = None

    def set_scheme(self, scheme: Union[str, Scheme]) -> None:
        """Set the scheme by value ("antipt_master", "antipt_nhh", "coherent", "three_mode")."""
        self.scheme = _enum(Scheme, scheme)

    def set_engine(self, engine: Union[str, Engine]) -> None:
        self.engine = _enum(Engine, engine)

    def set_compare_engine(self, engine: Optional[Union[str, Engine]]) -> None:
        self.compare_engine = None if engine is None else _enum(Engine, engine)

    def set_rate(self, name: str, value: Optional[float]) -> None:
        """Set g_eps, gamma, kappa or gamma_c with a nonnegativity check."""
        if name not in ("g_eps", "gamma", "kappa", "gamma_c"):
            raise ValueError(f"unknown rate {name!r}")
        if value is not None and value < 0:
            raise ValueError(f"{name} must be >= 0")
        setattr(self, name, value)

    def set_theta(self, theta: float) -> None:
        """Set a single pump phase; clears theta_grid."""
        self.theta = float(theta)
        self.theta_grid = None

    def set_theta_grid(self, grid: Sequence[float]) -> None:
        """Set a sweep grid; clears theta."""
        values = tuple(float(theta) for theta in grid)
        if not values:
            raise ValueError("theta_grid must not be empty")
        self.theta_grid = values
        self.theta = None

    def set_propagation(self, length: float, samples: int, step: Optional[float] = None) -> None:
        """Set the uniform z grid and the optional step override."""
        if length <= 0:
            raise ValueError("length must be > 0")
        if samples < 2:
            raise ValueError("samples must be >= 2")
        if step is not None and step <= 0:
            raise ValueError("step must be > 0")
        self.length, self.samples, self.step = float(length), int(samples), step

    def set_truncation(self, per_mode_cap: int, total_cap: Optional[int]) -> None:
        """Set the Fock caps."""
        if not 0 <= per_mode_cap <= MAX_CAP:
            raise ValueError(f"per_mode_cap must be in [0, {MAX_CAP}]")
        if total_cap is not None and not 0 <= total_cap <= MAX_CAP:
            raise ValueError(f"total_cap must be in [0, {MAX_CAP}]")
        self.per_mode_cap, self.total_cap = int(per_mode_cap), total_cap

    def set_workers(self, workers: int) -> None:
        if not 1 <= workers <= MAX_WORKERS:
            raise ValueError(f"workers must be in [1, {MAX_WORKERS}]")
        self.workers = int(workers)

    def validate(self) -> None:
        """
        Checks cross-field invariants.

        Raises:
            ConfigError: If both or neither of theta/theta_grid are set, or the
                three-mode scheme lacks kappa/gamma_c.
        """
        if (self.theta is None) == (self.theta_grid is None):
            raise ConfigError("exactly one of theta and theta_grid must be set")
        if self.scheme is Scheme.THREE_MODE and (self.kappa is None or self.gamma_c is None):
            raise ConfigError("model: three_mode scheme needs kappa and gamma_c")

    def model_params(self, theta: Optional[float] = None) -> ModelParams:
        """ModelParams for one phase; defaults to the configured single theta."""
        if theta is None:
            theta = self.theta if self.theta is not None else 0.0
        try:
            return ModelParams(
                g_eps=self.g_eps,
                gamma=self.gamma,
                theta=theta,
                scheme=self.scheme,
                kappa=self.kappa,
                gamma_c=self.gamma_c,
                per_mode_cap=self.per_mode_cap,
                total_cap=self.total_cap,
                length=self.length,
                samples=self.samples,
                step=self.step,
            )
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def waveguide_design(self) -> WaveguideDesign:
        """Copy of the design inputs with the configured field grids loaded."""
        if not (self.field_omega_path and self.field_2omega_path):
            return replace(self.design)
        return replace(
            self.design,
            field_omega=load_field_grid(self.field_omega_path),
            field_2omega=load_field_grid(self.field_2omega_path),
        )

    def to_dict(self) -> Dict[str, object]:
        """
        Serializes the configuration into plain JSON-compatible values.

        Returns:
            Dict[str, object]: Nested sections mirroring the YAML layout.
        """
        return {
            "model": {
                "scheme": self.scheme.value,
                "g_eps": self.g_eps,
                "gamma": self.gamma,
                "kappa": self.kappa,
                "gamma_c": self.gamma_c,
            },
            "phase": {
                "theta": self.theta,
                "theta_grid": list(self.theta_grid) if self.theta_grid is not None else None,
            },
            "propagation": {"length": self.length, "samples": self.samples, "step": self.step},
            "truncation": {"per_mode_cap": self.per_mode_cap, "total_cap": self.total_cap},
            "run": {
                "engine": self.engine.value,
                "jumps": self.jumps,
                "normalize_nhh": self.normalize_nhh,
                "output_dir": self.output_dir,
                "workers": self.workers,
                "compare_engine": self.compare_engine.value if self.compare_engine else None,
            },
            "design": {
                **self.design.to_dict(),
                "p_fund_in": self.p_fund_in,
                "p_shg_out": self.p_shg_out,
                "shg_length": self.shg_length,
                "field_omega": self.field_omega_path,
                "field_2omega": self.field_2omega_path,
                "calibration_csv": self.calibration_csv,
            },
        }

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of to_dict()."""
        # workers never changes results
        data = self.to_dict()
        data["run"] = {k: v for k, v in data["run"].items() if k != "workers"}
        return config_hash(data)


def _enum(kind, value):
    if isinstance(value, kind):
        return value
    try:
        return kind(str(value).lower())
    except ValueError:
        choices = ", ".join(member.value for member in kind)
        raise ValueError(f"{value!r} is not one of {choices}") from None


def _count(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{name} must be an integer")
    return value


def _flag(value: Any, name: str) -> bool:
    if not isinstance(value, bool):
        raise ValueError(f"{name} must be true or false")
    return value


def _number(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{name} must be a bare number")
    return float(value)


def _optional(value: Any, parse):
    return None if value is None else parse(value)


def parse_theta_grid(value: Any) -> Tuple[float, ...]:
    """
    Parses a theta grid: a list of angles or a mapping {start, stop, points}.
    """
    if isinstance(value, (list, tuple)):
        return tuple(parse_angle(theta) for theta in value)
    if isinstance(value, Mapping):
        unknown = set(value) - {"start", "stop", "points"}
        if unknown:
            raise ValueError(f"unknown theta_grid keys {sorted(unknown)}")
        points = _count(value.get("points", 33), "points")
        if points < 1:
            raise ValueError("points must be >= 1")
        start = parse_angle(value.get("start", 0.0))
        stop = parse_angle(value.get("stop", "2 pi"))
        return tuple(np.linspace(start, stop, points).tolist())
    raise ValueError("theta_grid must be a list or a {start, stop, points} mapping")


def _design_setter(attribute: str, parse):
    def apply(config: RunConfig, value: Any) -> None:
        setattr(config.design, attribute, parse(value))
    return apply


def _attribute_setter(attribute: str, parse):
    def apply(config: RunConfig, value: Any) -> None:
        setattr(config, attribute, parse(value))
    return apply


def _rate_setter(name: str, optional: bool = False):
    def apply(config: RunConfig, value: Any) -> None:
        if optional and value is None:
            config.set_rate(name, None)
        else:
            config.set_rate(name, parse_quantity(value, "rate"))
    return apply


def _propagation_setter(key: str):
    def apply(config: RunConfig, value: Any) -> None:
        length, samples, step = config.length, config.samples, config.step
        if key == "length":
            length = parse_quantity(value, "length")
        elif key == "samples":
            samples = _count(value, "samples")
        else:
            step = _optional(value, lambda v: parse_quantity(v, "length"))
        config.set_propagation(length, samples, step)
    return apply


def _truncation_setter(key: str):
    def apply(config: RunConfig, value: Any) -> None:
        if key == "per_mode_cap":
            config.set_truncation(_count(value, key), config.total_cap)
        else:
            config.set_truncation(config.per_mode_cap, _optional(value, lambda v: _count(v, key)))
    return apply


_APPLIERS = {
    "model": {
        "scheme": lambda config, value: config.set_scheme(value),
        "g_eps": _rate_setter("g_eps"),
        "gamma": _rate_setter("gamma"),
        "kappa": _rate_setter("kappa", optional=True),
        "gamma_c": _rate_setter("gamma_c", optional=True),
    },
    "phase": {
        "theta": lambda config, value: config.set_theta(parse_angle(value)),
        "theta_grid": lambda config, value: config.set_theta_grid(parse_theta_grid(value)),
    },
    "propagation": {key: _propagation_setter(key) for key in ("length", "samples", "step")},
    "truncation": {key: _truncation_setter(key) for key in ("per_mode_cap", "total_cap")},
    "run": {
        "engine": lambda config, value: config.set_engine(value),
        "jumps": _attribute_setter("jumps", lambda v: _flag(v, "jumps")),
        "normalize_nhh": _attribute_setter("normalize_nhh", lambda v: _flag(v, "normalize_nhh")),
        "output_dir": _attribute_setter("output_dir", str),
        "workers": lambda config, value: config.set_workers(_count(value, "workers")),
        "compare_engine": lambda config, value: config.set_compare_engine(value),
    },
    "design": {
        "n_pump": _design_setter("n_pump", lambda v: _number(v, "n_pump")),
        "n_fund": _design_setter("n_fund", lambda v: _number(v, "n_fund")),
        "lambda_fund": _design_setter("lambda_fund", lambda v: parse_quantity(v, "length")),
        "l_beat": _design_setter("l_beat", lambda v: parse_quantity(v, "length")),
        "gamma_c": _design_setter("gamma_c", lambda v: parse_quantity(v, "rate")),
        "d_eff": _design_setter("d_eff", lambda v: parse_quantity(v, "nonlinear")),
        "zeta": _design_setter("zeta", lambda v: _number(v, "zeta")),
        "a_eff": _design_setter("a_eff", lambda v: parse_quantity(v, "area")),
        "n_omega": _design_setter("n_omega", lambda v: _number(v, "n_omega")),
        "n_2omega": _design_setter("n_2omega", lambda v: _number(v, "n_2omega")),
        "lambda_2omega": _design_setter("lambda_2omega", lambda v: parse_quantity(v, "length")),
        "lambda_pump": _design_setter("lambda_pump", lambda v: parse_quantity(v, "length")),
        "pump_power": _design_setter("pump_power", lambda v: parse_quantity(v, "power")),
        "p_fund_in": _attribute_setter("p_fund_in", lambda v: parse_quantity(v, "power")),
        "p_shg_out": _attribute_setter("p_shg_out", lambda v: parse_quantity(v, "power")),
        "shg_length": _attribute_setter("shg_length", lambda v: parse_quantity(v, "length")),
        "field_omega": _attribute_setter("field_omega_path", str),
        "field_2omega": _attribute_setter("field_2omega_path", str),
        "calibration_csv": _attribute_setter("calibration_csv", str),
    },
}


def _key_lines(node: Optional[yaml.Node], prefix: Tuple[str, ...] = ()) -> Dict[Tuple[str, ...], int]:
    # 1-based line of every mapping key
    lines: Dict[Tuple[str, ...], int] = {}
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = prefix + (str(key_node.value),)
            lines[path] = key_node.start_mark.line + 1
            lines.update(_key_lines(value_node, path))
    return lines


def apply_mapping(
    config: RunConfig,
    data: Mapping[str, Any],
    source: str = "<config>",
    lines: Optional[Mapping[Tuple[str, ...], int]] = None,
) -> RunConfig:
    """
    Applies nested sections onto a RunConfig.

    Args:
        config (RunConfig): Configuration to update in place.
        data (Mapping[str, Any]): Sections as loaded from YAML.
        source (str): File name used in error messages.
        lines (Mapping, optional): Line of each key path, for anchored messages.

    Returns:
        RunConfig: The updated configuration.

    Raises:
        ConfigError: On unknown sections or keys and on invalid values.
    """
    lines = lines or {}

    def fail(path: Tuple[str, ...], reason: str) -> ConfigError:
        line = lines.get(path)
        where = f"{source}:{line}" if line is not None else source
        return ConfigError(f"{where}: {'.'.join(path)}: {reason}")

    if not isinstance(data, Mapping):
        raise ConfigError(f"{source}: top level must be a mapping of sections")
    for section, values in data.items():
        if section not in _SECTIONS:
            raise fail((section,), f"unknown section (expected one of {', '.join(_SECTIONS)})")
        if values is None:
            continue
        if not isinstance(values, Mapping):
            raise fail((section,), "section must be a mapping")
        for key, value in values.items():
            path = (section, str(key))
            applier = _APPLIERS[section].get(str(key))
            if applier is None:
                raise fail(path, "unknown key")
            try:
                applier(config, value)
            except (ValueError, TypeError) as e:
                raise fail(path, str(e)) from None
    phase = data.get("phase") or {}
    if "theta" in phase and "theta_grid" in phase:
        raise fail(("phase", "theta_grid"), "theta and theta_grid are mutually exclusive")
    return config


def load_config(path: str, config: Optional[RunConfig] = None) -> RunConfig:
    """
    Loads a YAML configuration file on top of the defaults.

    Args:
        path (str): YAML file.
        config (RunConfig, optional): Starting point; defaults to RunConfig().

    Returns:
        RunConfig: The loaded configuration.

    Raises:
        ConfigError: On YAML syntax errors and invalid keys or values.
    """
    config = config or RunConfig()
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror}") from e
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark is not None else path
        raise ConfigError(f"{where}: invalid YAML: {getattr(e, 'problem', e)}") from e
    apply_mapping(config, data, path, _key_lines(node))
    logger.info("loaded configuration %s", path)
    return config
