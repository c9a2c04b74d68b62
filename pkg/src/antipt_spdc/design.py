"""
Chip-design and calibration calculators.

Quasi-phase-matching period, hopping and effective dissipative coupling,
mode overlap and effective area from sampled transverse fields, the
normalized nonlinear coefficient, pump amplitude, SHG-derived coefficient,
the experimental g4 normalization and the heater phase calibration fit.
Everything is SI internally.
"""

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import epsilon_0
from scipy.optimize import least_squares

from antipt_spdc.exceptions import DesignError, FitDegeneracyError, PhaseMatchingError
from antipt_spdc.helpers import per_m_to_per_cm, wrap_phase

logger = logging.getLogger(__name__)

# Reference chip
REFERENCE_N_PUMP = 2.1262
REFERENCE_N_FUND = 1.8875
REFERENCE_LAMBDA_FUND = 1550e-9
REFERENCE_L_BEAT = 205e-6
REFERENCE_GAMMA_C = 81300.0
REFERENCE_D_EFF = 17.19e-12
REFERENCE_ZETA = 0.92
REFERENCE_A_EFF = 1.11e-12
REFERENCE_N_OMEGA = 1.8926
REFERENCE_N_2OMEGA = 2.1265
REFERENCE_LAMBDA_2OMEGA = 775e-9
REFERENCE_LAMBDA_PUMP = 775.4e-9
REFERENCE_PUMP_POWER = 4e-3

MIN_CALIBRATION_SAMPLES = 8
FREQUENCY_SCAN_POINTS = 4096


def _require_positive(**values: float) -> None:
    for name, value in values.items():
        if not value > 0:
            raise ValueError(f"{name} must be > 0, got {value!r}")


def qpm_period(n_pump: float, n_fund: float, lambda_fund: float) -> float:
    """
    Poling period of degenerate quasi-phase-matching, lambda_fund / (2 (n_pump - n_fund)).

    Raises:
        PhaseMatchingError: If n_pump <= n_fund.
        ValueError: If lambda_fund <= 0.
    """
    _require_positive(lambda_fund=lambda_fund)
    if n_pump <= n_fund:
        raise PhaseMatchingError(f"no positive poling period for n_pump={n_pump} <= n_fund={n_fund}")
    return lambda_fund / (2.0 * (n_pump - n_fund))


def phase_mismatch(n_pump: float, n_fund: float, lambda_fund: float, period: float) -> float:
    """Delta k = k_pump - 2 k_fund - 2 pi / period with lambda_pump = lambda_fund / 2 (m^-1)."""
    _require_positive(lambda_fund=lambda_fund, period=period)
    k_pump = 2.0 * math.pi * n_pump / (lambda_fund / 2.0)
    k_fund = 2.0 * math.pi * n_fund / lambda_fund
    return k_pump - 2.0 * k_fund - 2.0 * math.pi / period


def hopping_rate(l_beat: float) -> float:
    """kappa = pi / (2 L_beat) in m^-1."""
    _require_positive(l_beat=l_beat)
    return math.pi / (2.0 * l_beat)


def effective_coupling(kappa: float, gamma_c: float) -> float:
    """Gamma = |kappa|^2 / gamma_c, all rates in the same unit."""
    _require_positive(gamma_c=gamma_c)
    return abs(kappa) ** 2 / gamma_c


@dataclass(frozen=True, eq=False)
class FieldGrid:
    """
    Transverse field sampled on a rectangular grid.

    Attributes:
        values (np.ndarray): Complex field, shape (ny, nx).
        dx (float): Cell width (m).
        dy (float): Cell height (m).
    """
    values: np.ndarray
    dx: float
    dy: float

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=complex)
        if values.ndim != 2:
            raise ValueError("field grid must be two-dimensional")
        _require_positive(dx=self.dx, dy=self.dy)
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def integrate(self, integrand: np.ndarray) -> complex:
        return complex(np.sum(integrand) * self.cell_area)

    def __repr__(self):
        return f"<FieldGrid shape={self.shape} dx={self.dx:.3g} dy={self.dy:.3g}>"


def load_field_grid(path: str) -> FieldGrid:
    """
    Reads a field matrix with a one-line header "nx ny dx dy" (dx, dy in meters).

    Entries may be real or complex ("1+2j"); rows run along y.
    """
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 4:
            raise ValueError(f"{path}: header must be 'nx ny dx dy'")
        nx, ny = int(header[0]), int(header[1])
        dx, dy = float(header[2]), float(header[3])
        values = np.loadtxt(f, dtype=complex, ndmin=2)
    if values.shape != (ny, nx):
        raise ValueError(f"{path}: expected {ny}x{nx} values, got {values.shape[0]}x{values.shape[1]}")
    return FieldGrid(values, dx, dy)


def _mode_area(grid: FieldGrid) -> Tuple[float, complex]:
    intensity = np.abs(grid.values) ** 2
    power = grid.integrate(intensity).real
    if power <= 0:
        raise ValueError("field is identically zero")
    cubic = grid.integrate(intensity * grid.values)
    # odd fields cancel here while still carrying power
    if abs(cubic) <= 1e-12 * power * float(np.max(np.abs(grid.values))):
        raise DesignError("vanishing nonlinear overlap: int |E|^2 E cancels for this field")
    return power ** 3 / abs(cubic) ** 2, cubic


def overlap_and_area(field_omega: FieldGrid, field_2omega: FieldGrid) -> Tuple[float, float]:
    """
    Mode overlap factor and effective area of the fundamental and second-harmonic fields.

    zeta = |int (E_w^*)^2 E_2w| / (|int |E_w|^2 E_w|^(2/3) |int |E_2w|^2 E_2w|^(1/3)) and
    A_eff = (A_w^2 A_2w)^(1/3) with A = (int |E|^2)^3 / |int |E|^2 E|^2.

    Returns:
        Tuple[float, float]: (zeta, A_eff in m^2).

    Raises:
        ValueError: If the grids differ in geometry or a field is zero.
        DesignError: If a field has power but its cubic integral cancels (odd fields).
    """
    if field_omega.shape != field_2omega.shape or not (
        math.isclose(field_omega.dx, field_2omega.dx) and math.isclose(field_omega.dy, field_2omega.dy)
    ):
        raise ValueError("field grids do not share geometry")
    area_omega, cubic_omega = _mode_area(field_omega)
    area_2omega, cubic_2omega = _mode_area(field_2omega)
    numerator = field_omega.integrate(np.conj(field_omega.values) ** 2 * field_2omega.values)
    zeta = abs(numerator) / (abs(cubic_omega) ** (2.0 / 3.0) * abs(cubic_2omega) ** (1.0 / 3.0))
    a_eff = (area_omega ** 2 * area_2omega) ** (1.0 / 3.0)
    return float(zeta), float(a_eff)


def nonlinear_g(
    zeta: float,
    a_eff: float,
    n_omega: float,
    n_2omega: float,
    lambda_omega: float,
    lambda_2omega: float,
    d_eff: float,
) -> float:
    """
    Normalized nonlinear conversion coefficient (m^-1 J^-1/2).

    g = sqrt(16 pi^3 / (eps0 n_w^4 n_2w^2 lambda_w^2 lambda_2w)) d_eff zeta / sqrt(A_eff)
    """
    _require_positive(
        zeta=zeta, a_eff=a_eff, n_omega=n_omega, n_2omega=n_2omega, lambda_omega=lambda_omega,
        lambda_2omega=lambda_2omega,
    )
    if d_eff < 0:
        raise ValueError("d_eff must be >= 0")
    prefactor = 16.0 * math.pi ** 3 / (epsilon_0 * n_omega ** 4 * n_2omega ** 2 * lambda_omega ** 2 * lambda_2omega)
    return math.sqrt(prefactor) * d_eff * zeta / math.sqrt(a_eff)


def pump_amplitude(power: float, lambda_2omega: float) -> float:
    """Pump amplitude eps = sqrt(lambda_2w P / (8 pi c)) in J^1/2."""
    if power < 0:
        raise ValueError("pump power must be >= 0")
    _require_positive(lambda_2omega=lambda_2omega)
    return math.sqrt(lambda_2omega * power / (8.0 * math.pi * SPEED_OF_LIGHT))


def g_exp_from_shg(
    p_fund_in: float, p_shg_out: float, length: float, lambda_omega: float, lambda_2omega: float
) -> float:
    """
    Nonlinear coefficient from an SHG measurement, sqrt((P_2w / P_w) 2 pi c lambda_2w / (L^2 lambda_w^2)).
    """
    _require_positive(p_fund_in=p_fund_in, length=length, lambda_omega=lambda_omega, lambda_2omega=lambda_2omega)
    if p_shg_out < 0:
        raise ValueError("p_shg_out must be >= 0")
    ratio = p_shg_out / p_fund_in
    return math.sqrt(ratio * 2.0 * math.pi * SPEED_OF_LIGHT * lambda_2omega / (length ** 2 * lambda_omega ** 2))


def g4_exp_normalization(
    c4: float, rates: Sequence[float], total_time: float, windows: Sequence[float]
) -> float:
    """C4 / (R1 R2 R3 R4 T dt1 dt2 dt3)."""
    if len(rates) != 4 or len(windows) != 3:
        raise ValueError("need four rates and three coincidence windows")
    factors = [*rates, total_time, *windows]
    if any(not factor > 0 for factor in factors):
        raise ValueError("rates, integration time and windows must be > 0")
    return c4 / float(np.prod(factors))


@dataclass
class WaveguideDesign:
    """
    Inputs of the chip-level design numbers.

    Attributes:
        n_pump (float): Effective index at the pump wavelength.
        n_fund (float): Effective index at the fundamental wavelength.
        lambda_fund (float): Fundamental wavelength (m).
        l_beat (float): Beating length of the directional coupler (m).
        gamma_c (float): Loss rate of the middle waveguide (m^-1).
        d_eff (float): Effective nonlinear coefficient (m/V).
        zeta (float): Mode overlap factor; replaced when field grids are given.
        a_eff (float): Effective mode area (m^2); replaced when field grids are given.
        n_omega (float): Index at the fundamental used in the nonlinear coefficient.
        n_2omega (float): Index at the second harmonic used in the nonlinear coefficient.
        lambda_2omega (float): Second-harmonic wavelength used in the nonlinear coefficient (m).
        lambda_pump (float): Pump wavelength (m).
        pump_power (float): On-chip pump power (W).
        field_omega (Optional[FieldGrid]): Sampled fundamental field.
        field_2omega (Optional[FieldGrid]): Sampled second-harmonic field.
    """
    n_pump: float = REFERENCE_N_PUMP
    n_fund: float = REFERENCE_N_FUND
    lambda_fund: float = REFERENCE_LAMBDA_FUND
    l_beat: float = REFERENCE_L_BEAT
    gamma_c: float = REFERENCE_GAMMA_C
    d_eff: float = REFERENCE_D_EFF
    zeta: float = REFERENCE_ZETA
    a_eff: float = REFERENCE_A_EFF
    n_omega: float = REFERENCE_N_OMEGA
    n_2omega: float = REFERENCE_N_2OMEGA
    lambda_2omega: float = REFERENCE_LAMBDA_2OMEGA
    lambda_pump: float = REFERENCE_LAMBDA_PUMP
    pump_power: float = REFERENCE_PUMP_POWER
    field_omega: Optional[FieldGrid] = field(default=None, repr=False)
    field_2omega: Optional[FieldGrid] = field(default=None, repr=False)

    def overlap(self) -> Tuple[float, float]:
        if self.field_omega is not None and self.field_2omega is not None:
            return overlap_and_area(self.field_omega, self.field_2omega)
        return self.zeta, self.a_eff

    def report(self) -> Dict[str, Dict[str, float]]:
        """
        Every derived design number with its unit.

        Returns:
            Dict[str, Dict[str, float]]: name -> {"value": ..., plus unit variants}.
        """
        period = qpm_period(self.n_pump, self.n_fund, self.lambda_fund)
        kappa = hopping_rate(self.l_beat)
        gamma = effective_coupling(kappa, self.gamma_c)
        zeta, a_eff = self.overlap()
        g = nonlinear_g(zeta, a_eff, self.n_omega, self.n_2omega, self.lambda_fund, self.lambda_2omega, self.d_eff)
        eps = pump_amplitude(self.pump_power, self.lambda_pump)
        logger.debug("design: period=%.6g kappa=%.6g gamma=%.6g g=%.6g eps=%.6g", period, kappa, gamma, g, eps)
        return {
            "qpm_period": {"m": period, "um": period * 1e6},
            "phase_mismatch": {"m^-1": phase_mismatch(self.n_pump, self.n_fund, self.lambda_fund, period)},
            "kappa": {"m^-1": kappa, "cm^-1": per_m_to_per_cm(kappa)},
            "gamma_c": {"m^-1": self.gamma_c, "cm^-1": per_m_to_per_cm(self.gamma_c)},
            "gamma": {"m^-1": gamma, "cm^-1": per_m_to_per_cm(gamma)},
            "gamma_c_over_kappa": {"1": self.gamma_c / kappa},
            "zeta": {"1": zeta},
            "a_eff": {"m^2": a_eff, "um^2": a_eff * 1e12},
            "g": {"m^-1 J^-1/2": g},
            "epsilon": {"J^1/2": eps},
            "g_eps": {"m^-1": g * eps},
        }

    def to_dict(self) -> Dict[str, object]:
        values = asdict(self)
        values["field_omega"] = None if self.field_omega is None else repr(self.field_omega)
        values["field_2omega"] = None if self.field_2omega is None else repr(self.field_2omega)
        return values


@dataclass(frozen=True)
class CalibrationFit:
    """
    Heater calibration P_{a,b} = +-a cos(b P_heater + theta0) + c.

    Attributes:
        a (float): Fringe amplitude (W), > 0.
        b (float): Phase-conversion coefficient (rad/mW), > 0.
        c (float): Offset (W).
        theta0 (float): Phase at zero heater power (rad), in [0, 2 pi).
        residual (float): Euclidean norm of the fit residuals (W).
        samples (int): Number of calibration samples.
    """
    a: float
    b: float
    c: float
    theta0: float
    residual: float
    samples: int

    def phase(self, heater_mw: float) -> float:
        """Pump relative phase for a heater power in mW, wrapped to [0, 2 pi)."""
        return wrap_phase(self.b * heater_mw + self.theta0)

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    def __repr__(self):
        return f"<CalibrationFit b={self.b:.6g} theta0={self.theta0:.6g} residual={self.residual:.3g}>"


def _calibration_model(x: np.ndarray, heater: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    a, b, c, theta0 = x
    fringe = a * np.cos(b * heater + theta0)
    return c + fringe, c - fringe


def _initial_guess(heater: np.ndarray, difference: np.ndarray) -> Tuple[float, float, float]:
    # Projects the fringe onto cos/sin over a scan of frequencies and keeps the best one.
    # Heater settings need not be evenly spaced, so the scan stops at the median-spacing Nyquist limit.
    span = float(np.ptp(heater))
    spacing = float(np.median(np.diff(np.unique(heater))))
    frequencies = np.linspace(math.pi / span, math.pi / spacing, FREQUENCY_SCAN_POINTS)
    centered = difference - difference.mean()
    best = (-1.0, 0.0, 0.0, 0.0)
    for frequency in frequencies:
        basis = np.column_stack([np.cos(frequency * heater), np.sin(frequency * heater), np.ones_like(heater)])
        coeffs, *_ = np.linalg.lstsq(basis, difference, rcond=None)
        explained = float(np.sum((basis[:, :2] @ coeffs[:2]) * centered))
        if explained > best[0]:
            best = (explained, frequency, coeffs[0], coeffs[1])
    _, frequency, alpha, beta = best
    return frequency, math.hypot(alpha, beta), math.atan2(-beta, alpha)


def phase_calibration_fit(samples: Sequence[Sequence[float]]) -> CalibrationFit:
    """
    Fits the complementary output powers of the heater calibration.

    Args:
        samples (Sequence[Sequence[float]]): Rows (P_heater mW, P_a W, P_b W).

    Returns:
        CalibrationFit: Parameters with a > 0, b > 0 and theta0 in [0, 2 pi).

    Raises:
        FitDegeneracyError: For fewer than 8 samples, constant data or less than pi of phase.
        ValueError: For malformed samples.
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != 3:
        raise ValueError("calibration samples must be rows of (P_heater_mW, P_a_W, P_b_W)")
    if data.shape[0] < MIN_CALIBRATION_SAMPLES:
        raise FitDegeneracyError(f"need at least {MIN_CALIBRATION_SAMPLES} samples, got {data.shape[0]}")
    heater, p_a, p_b = data.T
    difference = 0.5 * (p_a - p_b)
    scale = max(float(np.max(np.abs(data[:, 1:]))), 1e-300)
    if np.ptp(heater) == 0 or np.ptp(difference) <= 1e-9 * scale:
        raise FitDegeneracyError("calibration data are constant; the phase coefficient is unidentifiable")

    b0, a0, theta0 = _initial_guess(heater, difference)
    c0 = float(np.mean(0.5 * (p_a + p_b)))

    def residuals(x):
        model_a, model_b = _calibration_model(x, heater)
        return np.concatenate([model_a - p_a, model_b - p_b])

    result = least_squares(residuals, x0=[a0, b0, c0, theta0], method="lm")
    if not result.success:
        raise FitDegeneracyError(f"calibration fit did not converge: {result.message}")
    a, b, c, theta = (float(v) for v in result.x)
    if b < 0:
        b, theta = -b, -theta
    if a < 0:
        a, theta = -a, theta + math.pi
    if b * np.ptp(heater) < math.pi:
        raise FitDegeneracyError("calibration data span less than pi of phase")
    fit = CalibrationFit(a, b, c, wrap_phase(theta), float(np.linalg.norm(result.fun)), int(data.shape[0]))
    logger.info("calibration fit: %r after %d evaluations", fit, result.nfev)
    return fit


def load_calibration_samples(path: str) -> np.ndarray:
    """
    Reads a calibration CSV with columns P_heater_mW, P_a_W, P_b_W.

    Returns:
        np.ndarray: Array of shape (n, 3).
    """
    rows: List[Tuple[float, float, float]] = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        missing = {"P_heater_mW", "P_a_W", "P_b_W"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            rows.append((float(row["P_heater_mW"]), float(row["P_a_W"]), float(row["P_b_W"])))
    return np.array(rows, dtype=float).reshape(-1, 3)
