"""
Acceptance suite.

Each check runs a set of engines at the reference operating point and
returns a CriterionResult with the measured residual. Failures are report
entries, never exceptions. Sweeps shared between checks are computed once
per ValidationContext.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from antipt_spdc import design
from antipt_spdc.enums import Direction, Engine, Mode, Scheme, Supermode, ThetaCase, WAVEGUIDE_MODES
from antipt_spdc.exceptions import AntiPTError
from antipt_spdc.fock import DensityMatrix, bd_transform, supermode_state
from antipt_spdc.gaussian import (
    ETA,
    G4_SPEC,
    CovarianceState,
    commutator_matrix,
    covariance_from_transfer,
    g4_coherent_pi,
    g4_coherent_theta0,
    g4_from_covariance,
    moment_ode,
    n_antipt_pi_det,
    n_antipt_pi_vac,
    n_antipt_theta0_det,
    n_antipt_theta0_vac,
    n_coherent_pi,
    n_coherent_theta0,
    transfer_antipt,
    transfer_coherent_pi,
    transfer_coherent_theta0,
    vacuum_noise_moments,
    wick_moment,
)
from antipt_spdc.model import (
    REFERENCE_GAMMA_C,
    REFERENCE_KAPPA,
    ModelParams,
    NonlinearCoeffs,
    build_h_nl,
    build_h_nl_bd,
    nonlinear_coeffs,
)
from antipt_spdc.observables import (
    G2_PAIRS,
    G3_TRIPLES,
    CorrelationRecord,
    g4,
    moment_eom_residual,
    pair_spec,
    r3,
    r4,
    triple_spec,
    visibility,
)
from antipt_spdc.propagate import evolve_classical, evolve_gaussian, evolve_master, evolve_nhh
from antipt_spdc.sweep import default_theta_grid, sweep_phase

logger = logging.getLogger(__name__)

RAW_COLUMNS = (
    [f"n_{mode.value.replace('_', '')}" for mode in WAVEGUIDE_MODES]
    + [column for column in CorrelationRecord.columns() if column.startswith(("G2_", "G3_"))]
    + ["G4"]
)
TINY = 1e-300
# the 4 mm coherent reference reaches (1 - tan^2(Omega L))^2 ~ 0.87 at theta = 0
COHERENT_R4_BAND = (0.85, 1.1)


@dataclass(frozen=True)
class CriterionResult:
    """
    Outcome of one acceptance check.

    Attributes:
        name (str): Criterion label, e.g. "A2".
        passed (bool): Whether the tolerance was met.
        residual (float): Measured residual the tolerance applies to.
        detail (str): Human-readable breakdown.
    """
    name: str
    passed: bool
    residual: float
    detail: str = ""

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)

    def __repr__(self):
        status = "PASS" if self.passed else "FAIL"
        return f"<CriterionResult {self.name} {status} residual={self.residual:.3g}>"


@dataclass(frozen=True)
class ValidationOptions:
    """
    Knobs of the acceptance suite.

    Attributes:
        cap (int): Fock cap (per mode and total) of the two-waveguide runs.
        samples (int): z samples of trajectory comparisons.
        theta_points (int): Points of the phase sweeps.
        workers (int): Worker processes for sweeps.
        flip_lambda_co (bool): Negate the co-generation amplitude of the bright/dark form.
        elimination_scales (Tuple[float, ...]): gamma_c/kappa scales run through the master equation.
        gaussian_scales (Tuple[float, ...]): Extra scales run through the Gaussian engine only.
        three_mode_cap (int): Fock cap of the three-mode runs.
        dfs_step (float): RK4 step of the decoherence-free-subspace check (m).
        seed (int): Seed of every random draw.
    """
    cap: int = 6
    samples: int = 11
    theta_points: int = 33
    workers: int = 1
    flip_lambda_co: bool = False
    elimination_scales: Tuple[float, ...] = (1.0, 3.0)
    gaussian_scales: Tuple[float, ...] = (10.0,)
    three_mode_cap: int = 4
    dfs_step: float = 2.5e-6
    seed: int = 0


def _relative(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), TINY)


def _max_relative(a: Sequence[float], b: Sequence[float]) -> float:
    return max((_relative(x, y) for x, y in zip(a, b)), default=0.0)


def _index_of(grid: Sequence[float], value: float) -> int:
    matches = np.flatnonzero(np.isclose(np.asarray(grid), value, atol=1e-12))
    if matches.size == 0:
        raise ValueError(f"grid does not contain {value:.6g}")
    return int(matches[0])


class ValidationContext:
    """
    Parameters and cached sweeps shared by the checks.
    """

    def __init__(self, options: Optional[ValidationOptions] = None):
        self.options = options or ValidationOptions()
        self.grid = default_theta_grid(self.options.theta_points)
        self._sweeps: Dict[Tuple[Engine, Scheme], List[CorrelationRecord]] = {}

    def params(self, **changes) -> ModelParams:
        base = ModelParams(
            per_mode_cap=self.options.cap, total_cap=self.options.cap, samples=self.options.samples
        )
        return base.replace(**changes)

    def sweep(self, engine: Engine, scheme: Scheme = Scheme.ANTIPT_MASTER) -> List[CorrelationRecord]:
        key = (engine, scheme)
        if key not in self._sweeps:
            template = self.params(scheme=scheme, samples=2)
            self._sweeps[key] = sweep_phase(template, self.grid, engine, workers=self.options.workers)
        return self._sweeps[key]

    @property
    def pi_index(self) -> int:
        return _index_of(self.grid, math.pi)


def check_truncation(context: ValidationContext) -> CriterionResult:
    """A1: raising the Fock cap by two changes no endpoint observable by 0.1% or more."""
    cap = context.options.cap
    worst, parts = 0.0, []
    for theta in (0.0, math.pi):
        low = evolve_master(context.params(theta=theta, samples=2)).final.to_row()
        high = evolve_master(context.params(theta=theta, samples=2, per_mode_cap=cap + 2, total_cap=cap + 2)).final.to_row()
        change = max(_relative(low[column], high[column]) for column in RAW_COLUMNS)
        worst = max(worst, change)
        parts.append(f"theta={theta:.4g}: {change:.3g}")
    return CriterionResult("A1", worst < 1e-3, worst, f"cap {cap} vs {cap + 2}; " + ", ".join(parts))


def _closed_form_residual(params: ModelParams, z_values: Sequence[float]) -> float:
    worst = 0.0
    for z in z_values:
        for transfer, n_closed, g4_closed in (
            (transfer_coherent_theta0(params, z), n_coherent_theta0(params, z), g4_coherent_theta0(params, z)),
            (transfer_coherent_pi(params, z), n_coherent_pi(params, z), g4_coherent_pi(params, z)),
        ):
            cov = covariance_from_transfer(transfer)
            worst = max(worst, _relative(cov.mean_photon_number(Mode.A_S), n_closed))
            worst = max(worst, _relative(g4_from_covariance(cov), g4_closed))
    for theta, det, vac in ((0.0, n_antipt_theta0_det, n_antipt_theta0_vac), (math.pi, n_antipt_pi_det, n_antipt_pi_vac)):
        states = moment_ode(params.replace(theta=theta), z_values)
        for z, cov in zip(z_values, states):
            worst = max(worst, _relative(cov.mean_photon_number(Mode.A_S), det(params, z) + vac(params, z)))
    return worst


def check_gaussian_agreement(context: ValidationContext) -> CriterionResult:
    """A2: master equation against the Gaussian engine, and closed forms against transfer matrices."""
    worst, parts = 0.0, []
    for scheme in (Scheme.ANTIPT_MASTER, Scheme.COHERENT):
        for theta in (0.0, math.pi):
            params = context.params(scheme=scheme, theta=theta)
            me = evolve_master(params).series("G4")[1:]
            gauss = evolve_gaussian(params).series("G4")[1:]
            deviation = _max_relative(me, gauss)
            worst = max(worst, deviation)
            parts.append(f"{scheme.value} theta={theta:.4g}: {deviation:.3g}")
    params = context.params()
    closed = _closed_form_residual(params, params.z_grid[1:])
    passed = worst < 1e-2 and closed < 1e-8
    return CriterionResult("A2", passed, worst, "; ".join(parts) + f"; closed forms {closed:.3g}")


def check_nhh_agreement(context: ValidationContext) -> CriterionResult:
    """A3: G4 of the master equation and the NHH description coincide."""
    worst, parts = 0.0, []
    for theta in (0.0, math.pi / 2, math.pi):
        params = context.params(theta=theta)
        me = evolve_master(params)
        nhh = evolve_nhh(params)
        deviation = _max_relative(me.series("G4")[1:], nhh.series("G4")[1:])
        n_deviation = _relative(me.final.n[Mode.A_S], nhh.final.n[Mode.A_S])
        worst = max(worst, deviation)
        parts.append(f"theta={theta:.4g}: G4 {deviation:.3g}, <n> {n_deviation:.3g}")
    return CriterionResult("A3", worst < 1e-2, worst, "; ".join(parts))


def _populations(record: CorrelationRecord) -> Tuple[float, float]:
    sm = record.supermode_n
    bright = sm[(Supermode.BRIGHT, "s")] + sm[(Supermode.BRIGHT, "i")]
    dark = sm[(Supermode.DARK, "s")] + sm[(Supermode.DARK, "i")]
    return bright, dark


def check_jump_signatures(context: ValidationContext) -> CriterionResult:
    """A4: g4 minimum at pi with jumps, maximum at pi without, and the NHH bright/dark equality."""
    me = context.sweep(Engine.ME)
    nhh = context.sweep(Engine.NHH)
    pi = context.pi_index
    me_g4 = np.array([g4(record) for record in me])
    nhh_g4 = np.array([g4(record) for record in nhh])
    me_min = int(np.argmin(me_g4)) == pi or math.isclose(me_g4.min(), me_g4[pi], rel_tol=1e-12)
    nhh_max = int(np.argmax(nhh_g4)) == pi or math.isclose(nhh_g4.max(), nhh_g4[pi], rel_tol=1e-12)
    me_gap = _relative(*_populations(me[pi]))
    nhh_gap = _relative(*_populations(nhh[pi]))
    passed = me_min and nhh_max and me_gap > 1e-6 and nhh_gap < 1e-8
    detail = (
        f"ME g4 argmin at pi: {me_min}; NHH g4 argmax at pi: {nhh_max}; "
        f"bright/dark gap at pi ME {me_gap:.3g}, NHH {nhh_gap:.3g}"
    )
    return CriterionResult("A4", passed, nhh_gap, detail)


def check_visibility(context: ValidationContext) -> CriterionResult:
    """A5: G4 fringe visibility over theta and its minimum at pi."""
    curve = [record.corr4 for record in context.sweep(Engine.ME)]
    value = visibility(curve)
    at_pi = int(np.argmin(curve)) == context.pi_index
    return CriterionResult("A5", value >= 0.985 and at_pi, 1.0 - value, f"visibility {value:.6f}; minimum at pi: {at_pi}")


def check_inter_pair_ratios(context: ValidationContext) -> CriterionResult:
    """A6: coherent R4 near 1 with an anti-correlated point; ME and Gaussian ratios agree."""
    coherent = [r4(record) for record in context.sweep(Engine.COHERENT, Scheme.COHERENT)]
    low, high = COHERENT_R4_BAND
    coherent_ok = all(low <= value <= high for value in coherent) and min(coherent) < 1.0
    me = context.sweep(Engine.ME)
    gauss = context.sweep(Engine.GAUSSIAN)
    deviation = _max_relative([r4(r) for r in me], [r4(r) for r in gauss])
    for triple in G3_TRIPLES:
        deviation = max(deviation, _max_relative([r3(r, triple) for r in me], [r3(r, triple) for r in gauss]))
    spreads = []
    for pair in G2_PAIRS[:2]:
        values = np.array([record.corr2[pair] for record in me])
        spreads.append(float(np.ptp(values) / np.max(values)))
    detail = (
        f"coherent R4 in [{min(coherent):.4f}, {max(coherent):.4f}]; ME/Gaussian ratio deviation {deviation:.3g}; "
        f"intra-waveguide G2 spread {max(spreads):.3g}"
    )
    return CriterionResult("A6", coherent_ok and deviation < 1e-2, deviation, detail)


def check_dark_subspace(context: ValidationContext) -> CriterionResult:
    """A7: dark populations frozen, bright populations decaying at 4 Gamma, moment equations consistent."""
    params = context.params(g_eps=0.0, step=context.options.dfs_step)
    basis = params.basis()
    psi0 = supermode_state(basis, {(Supermode.BRIGHT, "s"): 1, (Supermode.DARK, "i"): 1})
    trajectory = evolve_master(params, DensityMatrix.from_state(psi0))
    bright0, dark0 = _populations(trajectory.records[0])
    dark_drift = 0.0
    bright_error = 0.0
    for z, record in zip(trajectory.z, trajectory.records):
        bright, dark = _populations(record)
        dark_drift = max(dark_drift, abs(dark - dark0))
        bright_error = max(bright_error, _relative(bright, bright0 * math.exp(-4.0 * params.gamma * z)))

    rng = np.random.default_rng(context.options.seed)
    z0, delta = 2e-4, 1e-7
    eom = 0.0
    for theta in rng.uniform(0.0, 2.0 * math.pi, size=3):
        local = context.params(theta=float(theta), z_points=(0.0, z0 - delta, z0, z0 + delta))
        states = evolve_master(local, keep_states=True).states
        eom = max(eom, moment_eom_residual(local, states[1:], local.z_grid[1:]))
    passed = dark_drift < 1e-10 and bright_error < 1e-8 and eom < 1e-6
    detail = f"dark drift {dark_drift:.3g}; bright decay error {bright_error:.3g}; moment equations {eom:.3g}"
    return CriterionResult("A7", passed, max(bright_error, eom), detail)


def check_bright_dark_form(context: ValidationContext) -> CriterionResult:
    """The bright/dark form of the nonlinear term equals the waveguide form after the basis change."""
    params = context.params(theta=1.1)
    basis = params.basis()
    coeffs = nonlinear_coeffs(params.g_eps, params.theta)
    if context.options.flip_lambda_co:
        coeffs = NonlinearCoeffs(-coeffs.lambda_co, coeffs.lambda_x)
    mapped = bd_transform(build_h_nl_bd(params, basis, coeffs), Direction.TO_WAVEGUIDE, basis)
    residual = float(np.max(np.abs((mapped - build_h_nl(params, basis)).toarray()))) / params.g_eps
    return CriterionResult("BD", residual < 1e-12, residual, f"flip_lambda_co={context.options.flip_lambda_co}")


def _elimination_deviation(three_mode: CorrelationRecord, two_mode: CorrelationRecord) -> float:
    return max(_relative(three_mode.n[Mode.A_S], two_mode.n[Mode.A_S]), _relative(three_mode.corr4, two_mode.corr4))


def check_elimination(context: ValidationContext) -> CriterionResult:
    """A8: the three-mode model approaches the eliminated model as gamma_c/kappa grows at fixed Gamma."""
    options = context.options
    gamma = REFERENCE_KAPPA ** 2 / REFERENCE_GAMMA_C
    cap = options.three_mode_cap
    reference = context.params(gamma=gamma, per_mode_cap=cap, total_cap=cap, samples=2)
    reference_me = evolve_master(reference).final
    reference_gauss = evolve_gaussian(reference).final

    def three_mode(scale: float) -> ModelParams:
        return reference.replace(
            scheme=Scheme.THREE_MODE, kappa=REFERENCE_KAPPA * scale, gamma_c=REFERENCE_GAMMA_C * scale ** 2
        )

    me_deviation = []
    for scale in options.elimination_scales:
        me_deviation.append(_elimination_deviation(evolve_master(three_mode(scale)).final, reference_me))
    for scale in options.gaussian_scales:
        logger.warning("elimination scale x%g runs through the Gaussian engine only", scale)
    scales = sorted(set(options.elimination_scales) | set(options.gaussian_scales))
    gauss_deviation = [_elimination_deviation(evolve_gaussian(three_mode(s)).final, reference_gauss) for s in scales]

    def non_increasing(values: Sequence[float]) -> bool:
        return all(b <= a * (1.0 + 1e-9) for a, b in zip(values[:-1], values[1:]))

    first = me_deviation[0] if me_deviation else gauss_deviation[0]
    passed = first < 0.05 and non_increasing(me_deviation) and non_increasing(gauss_deviation)
    detail = (
        "master equation "
        + ", ".join(f"x{s:g}: {d:.3g}" for s, d in zip(options.elimination_scales, me_deviation))
        + "; gaussian "
        + ", ".join(f"x{s:g}: {d:.3g}" for s, d in zip(scales, gauss_deviation))
    )
    return CriterionResult("A8", passed, first, detail)


def _pairing_sum(items: List[Tuple[Mode, bool]], contract: Callable) -> complex:
    if not items:
        return 1.0
    first, rest = items[0], items[1:]
    total = 0.0
    for j, partner in enumerate(rest):
        total += contract(first, partner) * _pairing_sum(rest[:j] + rest[j + 1:], contract)
    return total


def brute_force_moment(cov: CovarianceState, op_spec: Sequence[Tuple[Mode, bool]]) -> complex:
    """Sum over all perfect pairings of the ordered two-point contractions."""
    def contract(x, y):
        i, j = cov.index(x[0]), cov.index(y[0])
        if x[1] and y[1]:
            return np.conj(cov.m_block[i, j])
        if x[1]:
            return cov.n_block[i, j]
        return cov.m_block[i, j]

    return complex(_pairing_sum(list(op_spec), contract))


def random_covariance(rng: np.random.Generator) -> CovarianceState:
    x = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    y = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    return CovarianceState(x @ x.conj().T, y + y.T)


def check_gaussian_integrity(context: ValidationContext) -> CriterionResult:
    """A9: hafnian against pairing enumeration, commutator restoration and the Bogoliubov condition."""
    rng = np.random.default_rng(context.options.seed)
    specs = [G4_SPEC, pair_spec(Mode.A_S, Mode.B_I), triple_spec(Mode.A_S, Mode.A_I, Mode.B_S)]
    wick = 0.0
    for _ in range(5):
        cov = random_covariance(rng)
        for spec in specs:
            expected = brute_force_moment(cov, spec)
            wick = max(wick, abs(wick_moment(cov, spec) - expected) / max(abs(expected), 1.0))
    params = context.params()
    commutator = 0.0
    for theta_case in (ThetaCase.ZERO, ThetaCase.PI):
        for z in (0.5 * params.length, params.length):
            transfer, _ = transfer_antipt(params, z, theta_case)
            noise = vacuum_noise_moments(params, z, theta_case)
            commutator = max(commutator, float(np.max(np.abs(commutator_matrix(transfer, noise) - ETA))))
    bogoliubov = max(
        transfer_coherent_theta0(params, params.length).bogoliubov_defect(),
        transfer_coherent_pi(params, params.length).bogoliubov_defect(),
    )
    passed = wick < 1e-10 and commutator < 1e-8 and bogoliubov < 1e-10
    detail = f"wick {wick:.3g}; commutator {commutator:.3g}; bogoliubov {bogoliubov:.3g}"
    return CriterionResult("A9", passed, max(wick, commutator, bogoliubov), detail)


def synthetic_calibration(
    a: float = 1.0, b: float = 0.037, c: float = 1.2, theta0: float = 0.56, points: int = 60,
    noise: float = 0.0, seed: int = 0,
) -> np.ndarray:
    """Heater sweep over 0-242 mW of the complementary output powers."""
    heater = np.linspace(0.0, 242.0, points)
    fringe = a * np.cos(b * heater + theta0)
    p_a, p_b = c + fringe, c - fringe
    if noise:
        rng = np.random.default_rng(seed)
        p_a = p_a + noise * a * rng.normal(size=points)
        p_b = p_b + noise * a * rng.normal(size=points)
    return np.column_stack([heater, p_a, p_b])


def check_design_numbers(context: ValidationContext) -> CriterionResult:
    """A10: reference design numbers and the calibration round trip."""
    report = design.WaveguideDesign().report()
    checks = [
        ("period_um", report["qpm_period"]["um"], 3.25, 0.01, True),
        ("kappa_cm", report["kappa"]["cm^-1"], 76.62, 0.01, True),
        ("gamma_cm", report["gamma"]["cm^-1"], 7.22, 0.01, True),
        ("g", report["g"]["m^-1 J^-1/2"], 1.08e10, 0.01, False),
        ("epsilon", report["epsilon"]["J^1/2"], 6.41e-10, 0.01, False),
        ("g_eps", report["g_eps"]["m^-1"], 6.93, 0.01, False),
    ]
    worst, failures = 0.0, []
    for name, value, target, tolerance, absolute in checks:
        error = abs(value - target) if absolute else _relative(value, target)
        worst = max(worst, error / tolerance)
        if error > tolerance:
            failures.append(f"{name}={value:.6g}")
    try:
        fit = design.phase_calibration_fit(synthetic_calibration())
        fit_error = max(_relative(fit.b, 0.037), _relative(fit.theta0, 0.56))
    except AntiPTError as e:
        fit_error = math.inf
        failures.append(f"fit: {e}")
    if fit_error > 0.01:
        failures.append(f"calibration error {fit_error:.3g}")
    worst = max(worst, fit_error / 0.01)
    detail = "all design numbers within tolerance" if not failures else "; ".join(failures)
    return CriterionResult("A10", not failures, worst, detail)


def check_classical_splitting(context: ValidationContext) -> CriterionResult:
    """A11: a single-waveguide input splits equally once the bright part has decayed."""
    gamma = context.params().gamma
    z = np.linspace(5.0 / gamma, 20.0 / gamma, 16)
    imbalance = float(np.max(evolve_classical(gamma, (1.0, 0.0), z).imbalance()))
    return CriterionResult("A11", imbalance < 1e-3, imbalance, f"max imbalance for z >= 5/Gamma: {imbalance:.3g}")


CHECKS: Dict[str, Callable[[ValidationContext], CriterionResult]] = {
    "A1": check_truncation,
    "A2": check_gaussian_agreement,
    "A3": check_nhh_agreement,
    "A4": check_jump_signatures,
    "A5": check_visibility,
    "A6": check_inter_pair_ratios,
    "A7": check_dark_subspace,
    "BD": check_bright_dark_form,
    "A8": check_elimination,
    "A9": check_gaussian_integrity,
    "A10": check_design_numbers,
    "A11": check_classical_splitting,
}


def run_all(options: Optional[ValidationOptions] = None, only: Optional[Sequence[str]] = None) -> List[CriterionResult]:
    """
    Runs the acceptance checks.

    Args:
        options (ValidationOptions, optional): Suite knobs.
        only (Sequence[str], optional): Subset of CHECKS keys.

    Returns:
        List[CriterionResult]: One result per check; solver failures become failed results.
    """
    context = ValidationContext(options)
    names = list(only) if only else list(CHECKS)
    unknown = [name for name in names if name not in CHECKS]
    if unknown:
        raise ValueError(f"unknown checks {unknown}; choose from {', '.join(CHECKS)}")
    results = []
    for name in names:
        logger.info("running check %s", name)
        try:
            result = CHECKS[name](context)
        except (AntiPTError, ValueError) as e:
            result = CriterionResult(name, False, math.inf, f"{type(e).__name__}: {e}")
        logger.info("%r", result)
        results.append(result)
    return results
