"""
Correlation observables.

This module defines CorrelationRecord, the per-sample bundle of mean photon
numbers and unnormalized two-, three- and four-photon correlations, the
extractor that builds records from any state representation, and the
normalized ratios and fringe metrics computed from records.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from antipt_spdc.enums import FREQUENCIES, WAVEGUIDE_MODES, LadderKind, Mode, Supermode
from antipt_spdc.exceptions import BasisError, UndefinedObservableError
from antipt_spdc.fock import DensityMatrix, FockBasis, StateVector, dagger, ladder, supermode, trace_product
from antipt_spdc.gaussian import G4_SPEC, CovarianceState, wick_moment
from antipt_spdc.model import ModelParams, nonlinear_coeffs

logger = logging.getLogger(__name__)

OpSpec = Sequence[Tuple[Mode, bool]]
Pair = Tuple[Mode, Mode]
Triple = Tuple[Mode, Mode, Mode]

G2_PAIRS: Tuple[Pair, ...] = (
    (Mode.A_S, Mode.A_I),
    (Mode.B_S, Mode.B_I),
    (Mode.A_S, Mode.B_I),
    (Mode.A_I, Mode.B_S),
)
# (pair; single)
G3_TRIPLES: Tuple[Triple, ...] = (
    (Mode.A_S, Mode.A_I, Mode.B_S),
    (Mode.A_S, Mode.A_I, Mode.B_I),
    (Mode.B_S, Mode.B_I, Mode.A_S),
    (Mode.B_S, Mode.B_I, Mode.A_I),
)
SUPERMODE_KEYS: Tuple[Tuple[Supermode, str], ...] = tuple(
    (kind, frequency) for kind in (Supermode.BRIGHT, Supermode.DARK) for frequency in FREQUENCIES
)


def mode_tag(mode: Mode) -> str:
    return mode.value.replace("_", "")


def supermode_tag(key: Tuple[Supermode, str]) -> str:
    return f"{key[0].value}{key[1]}"


def pair_spec(first: Mode, second: Mode) -> List[Tuple[Mode, bool]]:
    return [(first, True), (second, True), (second, False), (first, False)]


def triple_spec(first: Mode, second: Mode, third: Mode) -> List[Tuple[Mode, bool]]:
    return [(first, True), (second, True), (third, True), (third, False), (second, False), (first, False)]


def _check_normal_order(op_spec: OpSpec) -> None:
    seen_plain = False
    for _, is_dagger in op_spec:
        if is_dagger and seen_plain:
            raise ValueError("operator spec is not normally ordered")
        seen_plain = seen_plain or not is_dagger


@dataclass(frozen=True)
class CorrelationRecord:
    """
    Observables of one state at one position and phase.

    Attributes:
        z (float): Position (m).
        theta (float): Pump relative phase (rad).
        n (Dict[Mode, float]): Mean photon number per waveguide mode.
        corr2 (Dict[Pair, float]): Unnormalized G2 for each pair in G2_PAIRS.
        corr3 (Dict[Triple, float]): Unnormalized G3 for each triple in G3_TRIPLES.
        corr4 (float): Unnormalized G4.
        supermode_n (Dict[Tuple[Supermode, str], float]): Bright/dark mean photon numbers.
    """
    z: float
    theta: float
    n: Dict[Mode, float]
    corr2: Dict[Pair, float]
    corr3: Dict[Triple, float]
    corr4: float
    supermode_n: Dict[Tuple[Supermode, str], float] = field(default_factory=dict)

    @staticmethod
    def columns() -> List[str]:
        names = ["z_m", "theta"]
        names += [f"n_{mode_tag(mode)}" for mode in WAVEGUIDE_MODES]
        names += [f"G2_{mode_tag(x)}_{mode_tag(y)}" for x, y in G2_PAIRS]
        names += [f"G3_{mode_tag(x)}_{mode_tag(y)}_{mode_tag(s)}" for x, y, s in G3_TRIPLES]
        names += ["G4"]
        names += [f"n_{supermode_tag(key)}" for key in SUPERMODE_KEYS]
        names += ["g4", "R4"]
        names += [f"R3_{mode_tag(x)}_{mode_tag(y)}_{mode_tag(s)}" for x, y, s in G3_TRIPLES]
        return names

    def to_row(self) -> Dict[str, Optional[float]]:
        """
        Flattens the record into CSV columns; undefined ratios are None.

        Returns:
            Dict[str, Optional[float]]: Values keyed by CorrelationRecord.columns().
        """
        values: List[Optional[float]] = [self.z, self.theta]
        values += [self.n[mode] for mode in WAVEGUIDE_MODES]
        values += [self.corr2[pair] for pair in G2_PAIRS]
        values += [self.corr3[triple] for triple in G3_TRIPLES]
        values += [self.corr4]
        values += [self.supermode_n.get(key) for key in SUPERMODE_KEYS]
        values += [_defined(g4, self), _defined(r4, self)]
        values += [_defined(r3, self, triple) for triple in G3_TRIPLES]
        return dict(zip(self.columns(), values))

    def value(self, column: str) -> Optional[float]:
        return self.to_row()[column]

    def __repr__(self):
        return f"<CorrelationRecord z={self.z:.6g} theta={self.theta:.6g} G4={self.corr4:.6g}>"


def _defined(func, *args) -> Optional[float]:
    try:
        return func(*args)
    except UndefinedObservableError:
        return None


@lru_cache(maxsize=256)
def _moment_operator(basis: FockBasis, op_spec: Tuple[Tuple[Mode, bool], ...]) -> sparse.csr_matrix:
    op = sparse.identity(basis.dim, dtype=complex, format="csr")
    for mode, is_dagger in op_spec:
        kind = LadderKind.CREATE if is_dagger else LadderKind.ANNIHILATE
        op = (op @ ladder(basis, mode, kind)).tocsr()
    return op


def moment_operator(basis: FockBasis, op_spec: OpSpec) -> sparse.csr_matrix:
    """Product of ladder operators in the given order."""
    return _moment_operator(basis, tuple(op_spec))


def normally_ordered_moment(state: Union[StateVector, DensityMatrix, CovarianceState], op_spec: OpSpec) -> complex:
    """
    Expectation of a normally ordered product of ladder operators.

    Args:
        state: StateVector (unnormalized expectation), DensityMatrix or CovarianceState.
        op_spec (OpSpec): (mode, is_dagger) pairs, daggers first.

    Returns:
        complex: The moment.

    Raises:
        ValueError: If op_spec is not normally ordered.
        BasisError: If a mode is not part of the state's basis.
    """
    op_spec = list(op_spec)
    _check_normal_order(op_spec)
    if isinstance(state, CovarianceState):
        return wick_moment(state, op_spec)
    op = moment_operator(state.basis, op_spec)
    return state.expect(op)


@lru_cache(maxsize=8)
def _fock_observables(basis: FockBasis) -> Dict[str, sparse.csr_matrix]:
    basis.require(WAVEGUIDE_MODES)
    ops: Dict[str, sparse.csr_matrix] = {}
    for mode in WAVEGUIDE_MODES:
        ops[f"n_{mode_tag(mode)}"] = ladder(basis, mode, LadderKind.NUMBER)
    for pair in G2_PAIRS:
        ops[pair] = moment_operator(basis, pair_spec(*pair))
    for triple in G3_TRIPLES:
        ops[triple] = moment_operator(basis, triple_spec(*triple))
    ops["G4"] = moment_operator(basis, G4_SPEC)
    for key in SUPERMODE_KEYS:
        annihilate = supermode(basis, *key)
        ops[key] = (dagger(annihilate) @ annihilate).tocsr()
    return ops


class CorrelationExtractor:
    """
    Builds CorrelationRecords from Fock-space states or Gaussian second moments.
    """

    @staticmethod
    def extract(
        state: Union[StateVector, DensityMatrix, CovarianceState], z: float = 0.0, theta: float = 0.0
    ) -> CorrelationRecord:
        """
        Extracts every observable of a state.

        Args:
            state: StateVector, DensityMatrix or CovarianceState.
            z (float): Position to stamp on the record; a CovarianceState uses its own z.
            theta (float): Phase to stamp on the record.

        Returns:
            CorrelationRecord: The observables.
        """
        if isinstance(state, CovarianceState):
            return CorrelationExtractor.from_covariance(state, theta)
        if isinstance(state, DensityMatrix):
            return CorrelationExtractor.from_arrays(state.basis, z, theta, rho=state.matrix)
        return CorrelationExtractor.from_arrays(state.basis, z, theta, psi=state.amplitudes)

    @staticmethod
    def from_arrays(
        basis: FockBasis,
        z: float,
        theta: float,
        rho: Optional[np.ndarray] = None,
        psi: Optional[np.ndarray] = None,
    ) -> CorrelationRecord:
        ops = _fock_observables(basis)
        if rho is not None:
            def expect(op):
                return trace_product(op, rho).real
        elif psi is not None:
            def expect(op):
                return np.vdot(psi, op @ psi).real
        else:
            raise ValueError("from_arrays needs rho or psi")
        return CorrelationRecord(
            z=float(z),
            theta=float(theta),
            n={mode: float(expect(ops[f"n_{mode_tag(mode)}"])) for mode in WAVEGUIDE_MODES},
            corr2={pair: float(expect(ops[pair])) for pair in G2_PAIRS},
            corr3={triple: float(expect(ops[triple])) for triple in G3_TRIPLES},
            corr4=float(expect(ops["G4"])),
            supermode_n={key: float(expect(ops[key])) for key in SUPERMODE_KEYS},
        )

    @staticmethod
    def from_covariance(cov: CovarianceState, theta: float = 0.0) -> CorrelationRecord:
        def moment(op_spec):
            return float(wick_moment(cov, op_spec).real)

        supermode_n = {}
        for kind, frequency in SUPERMODE_KEYS:
            a, b = cov.index(Mode.of("a", frequency)), cov.index(Mode.of("b", frequency))
            block = cov.n_block
            cross = block[a, b] + block[b, a]
            sign = 1.0 if kind is Supermode.BRIGHT else -1.0
            supermode_n[(kind, frequency)] = float(0.5 * (block[a, a] + block[b, b] + sign * cross).real)
        return CorrelationRecord(
            z=float(cov.z),
            theta=float(theta),
            n={mode: cov.mean_photon_number(mode) for mode in WAVEGUIDE_MODES},
            corr2={pair: moment(pair_spec(*pair)) for pair in G2_PAIRS},
            corr3={triple: moment(triple_spec(*triple)) for triple in G3_TRIPLES},
            corr4=moment(G4_SPEC),
            supermode_n=supermode_n,
        )


def _ratio(numerator: float, denominator: float, what: str) -> float:
    if denominator <= 0.0:
        raise UndefinedObservableError(f"{what} is undefined: denominator {denominator!r}")
    return numerator / denominator


def g4(record: CorrelationRecord) -> float:
    """G4 / (n_as n_ai n_bs n_bi)."""
    denominator = float(np.prod([record.n[mode] for mode in WAVEGUIDE_MODES]))
    return _ratio(record.corr4, denominator, "g4")


def g2(record: CorrelationRecord, pair: Pair) -> float:
    """Normalized two-photon correlation G2 / (n_x n_y) of one of the G2_PAIRS."""
    return _ratio(record.corr2[pair], record.n[pair[0]] * record.n[pair[1]], "g2")


def r4(record: CorrelationRecord) -> float:
    """G4 / (G2_{a_s,a_i} G2_{b_s,b_i})."""
    denominator = record.corr2[G2_PAIRS[0]] * record.corr2[G2_PAIRS[1]]
    return _ratio(record.corr4, denominator, "R4")


def r3(record: CorrelationRecord, triple: Triple) -> float:
    """G3 / (G2 of the pair times the mean photon number of the single)."""
    first, second, single = triple
    pair = (first, second)
    if pair not in record.corr2:
        raise BasisError(f"triple {tuple(m.value for m in triple)} does not start with a recorded pair")
    denominator = record.corr2[pair] * record.n[single]
    return _ratio(record.corr3[triple], denominator, "R3")


def visibility(curve: Sequence[float]) -> float:
    """
    Fringe visibility (max - min) / (max + min).

    Raises:
        ValueError: If the curve is empty.
        UndefinedObservableError: If max + min vanishes.
    """
    values = np.asarray(list(curve), dtype=float)
    if values.size == 0:
        raise ValueError("visibility of an empty curve")
    high, low = float(values.max()), float(values.min())
    if high + low == 0.0:
        raise UndefinedObservableError("visibility of an all-zero curve")
    return (high - low) / (high + low)


def moment_eom_rhs(params: ModelParams, rho: DensityMatrix) -> Dict[Tuple[Supermode, str], float]:
    """
    Right-hand sides of the bright/dark mean-number equations of the anti-PT master equation.

    d<n_B_s>/dz = -4 Gamma <n_B_s> - 2 Im[Lco^* <B_s B_i> + Lx^* <B_s D_i>], and
    likewise for B_i; dark modes have no loss term.

    Args:
        params (ModelParams): Anti-PT parameters.
        rho (DensityMatrix): State on a waveguide basis.

    Returns:
        Dict[Tuple[Supermode, str], float]: Derivative of each bright/dark population.
    """
    coeffs = nonlinear_coeffs(params.g_eps, params.theta)
    basis = rho.basis
    ops = {key: supermode(basis, *key) for key in SUPERMODE_KEYS}
    bright_s, bright_i = ops[(Supermode.BRIGHT, "s")], ops[(Supermode.BRIGHT, "i")]
    dark_s, dark_i = ops[(Supermode.DARK, "s")], ops[(Supermode.DARK, "i")]

    def expect(op):
        return rho.expect(op)

    bb = expect(bright_s @ bright_i)
    dd = expect(dark_s @ dark_i)
    bd = expect(bright_s @ dark_i)
    db = expect(dark_s @ bright_i)
    populations = {key: expect(dagger(op) @ op).real for key, op in ops.items()}
    co, cross = np.conj(coeffs.lambda_co), np.conj(coeffs.lambda_x)
    decay = 4.0 * params.gamma
    return {
        (Supermode.BRIGHT, "s"): -decay * populations[(Supermode.BRIGHT, "s")] - 2.0 * float(np.imag(co * bb + cross * bd)),
        (Supermode.BRIGHT, "i"): -decay * populations[(Supermode.BRIGHT, "i")] - 2.0 * float(np.imag(co * bb + cross * db)),
        (Supermode.DARK, "s"): -2.0 * float(np.imag(co * dd + cross * db)),
        (Supermode.DARK, "i"): -2.0 * float(np.imag(co * dd + cross * bd)),
    }


def moment_eom_residual(
    params: ModelParams, states: Sequence[DensityMatrix], z: Sequence[float]
) -> float:
    """
    Compares a centered finite difference of the bright/dark populations with moment_eom_rhs.

    Args:
        params (ModelParams): Anti-PT parameters.
        states (Sequence[DensityMatrix]): Three states at z[0] < z[1] < z[2].
        z (Sequence[float]): Their positions; z[1] must be the midpoint.

    Returns:
        float: Largest absolute mismatch, relative to the largest term in the equations.
    """
    if len(states) != 3 or len(z) != 3:
        raise ValueError("moment_eom_residual needs three states")
    before, middle, after = states
    delta = z[2] - z[0]
    if delta <= 0 or not np.isclose(z[1] - z[0], z[2] - z[1], rtol=1e-9, atol=0.0):
        raise ValueError("z must be an equally spaced increasing triple")
    rhs = moment_eom_rhs(params, middle)
    scale = 0.0
    worst = 0.0
    for key, op in ((key, supermode(middle.basis, *key)) for key in SUPERMODE_KEYS):
        number = (dagger(op) @ op).tocsr()
        derivative = (after.expect(number).real - before.expect(number).real) / delta
        worst = max(worst, abs(derivative - rhs[key]))
        scale = max(scale, abs(rhs[key]), abs(derivative), 4.0 * params.gamma * middle.expect(number).real)
    if scale == 0.0:
        return worst
    return worst / scale
