"""
z-propagation of density matrices, state vectors, Gaussian moments and
classical amplitudes.

Quantum solvers use a fixed-step fourth-order Runge-Kutta march between the
requested samples. By default a Trajectory keeps one CorrelationRecord per
sample; full states are kept only on request.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from antipt_spdc.enums import Scheme
from antipt_spdc.exceptions import IntegrationError, SchemeError
from antipt_spdc.fock import DensityMatrix, StateVector
from antipt_spdc.gaussian import CovarianceState, moment_ode
from antipt_spdc.model import ModelParams, build_system
from antipt_spdc.observables import CorrelationExtractor, CorrelationRecord

logger = logging.getLogger(__name__)

TRACE_TOLERANCE = 1e-8
HERMITICITY_TOLERANCE = 1e-10
EIGENVALUE_FLOOR = -1e-8
INITIAL_TOLERANCE = 1e-10
NORM_GROWTH_TOLERANCE = 1e-10
CAP_SHELL_WARNING = 1e-6

StateType = Union[DensityMatrix, StateVector, CovarianceState]


@dataclass
class Trajectory:
    """
    Observables recorded on a z grid.

    Attributes:
        z (np.ndarray): Sample positions (m), starting at 0.
        records (List[CorrelationRecord]): One record per sample.
        scheme (Scheme): Scheme that produced the trajectory.
        params (ModelParams): Parameters echo.
        states (Optional[List[StateType]]): Full states, when requested.
    """
    z: np.ndarray
    records: List[CorrelationRecord]
    scheme: Scheme
    params: ModelParams
    states: Optional[List[StateType]] = field(default=None, repr=False)

    @property
    def final(self) -> CorrelationRecord:
        return self.records[-1]

    def series(self, column: str) -> np.ndarray:
        """
        Column of CorrelationRecord.to_row() along z; undefined values become NaN.
        """
        values = [record.value(column) for record in self.records]
        return np.array([np.nan if value is None else value for value in values], dtype=float)

    def __len__(self) -> int:
        return len(self.records)

    def __repr__(self):
        return f"<Trajectory scheme={self.scheme.value} samples={len(self.records)} z_max={self.z[-1]:.6g}>"


@dataclass(frozen=True)
class ClassicalTrajectory:
    """
    Classical single-frequency amplitudes of waveguides a and b.

    Attributes:
        z (np.ndarray): Positions (m).
        a (np.ndarray): Complex amplitude in waveguide a.
        b (np.ndarray): Complex amplitude in waveguide b.
    """
    z: np.ndarray
    a: np.ndarray
    b: np.ndarray

    @property
    def power_a(self) -> np.ndarray:
        return np.abs(self.a) ** 2

    @property
    def power_b(self) -> np.ndarray:
        return np.abs(self.b) ** 2

    def imbalance(self) -> np.ndarray:
        """|P_a - P_b| / (P_a + P_b); NaN where both powers vanish."""
        total = self.power_a + self.power_b
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.abs(self.power_a - self.power_b) / total


def default_step(params: ModelParams) -> float:
    """
    RK4 step h = min(1 / (40 max_rate), L / 400), or params.step when set.
    """
    if params.step is not None:
        return params.step
    length = float(params.z_grid[-1])
    candidates = [length / 400.0] if length > 0 else []
    rate = params.max_rate()
    if rate > 0:
        candidates.append(1.0 / (40.0 * rate))
    if not candidates:
        return 1.0
    return min(candidates)


def _rk4_step(rhs: Callable[[np.ndarray], np.ndarray], x: np.ndarray, dz: float) -> np.ndarray:
    k1 = rhs(x)
    k2 = rhs(x + 0.5 * dz * k1)
    k3 = rhs(x + 0.5 * dz * k2)
    k4 = rhs(x + dz * k3)
    return x + (dz / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _march(
    rhs: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, z_grid: Sequence[float], step: float
) -> Iterator[Tuple[float, np.ndarray, int]]:
    """Yields (z, x, steps taken) at every grid point, starting with z_grid[0]."""
    x = x0
    total_steps = 0
    yield float(z_grid[0]), x, 0
    for z_start, z_end in zip(z_grid[:-1], z_grid[1:]):
        span = z_end - z_start
        substeps = max(1, int(math.ceil(span / step - 1e-9)))
        dz = span / substeps
        for _ in range(substeps):
            x = _rk4_step(rhs, x, dz)
        total_steps += substeps
        yield float(z_end), x, total_steps


def _check_initial_density(rho0: DensityMatrix) -> None:
    if rho0.hermiticity_error() > INITIAL_TOLERANCE:
        raise ValueError("initial density matrix is not Hermitian")
    if abs(rho0.trace() - 1.0) > INITIAL_TOLERANCE:
        raise ValueError(f"initial density matrix has trace {rho0.trace().real:.12g}")
    if rho0.min_eigenvalue() < -INITIAL_TOLERANCE:
        raise ValueError("initial density matrix is not positive semidefinite")


def _check_density(rho: np.ndarray, z: float, include_jumps: bool) -> None:
    if not np.all(np.isfinite(rho)):
        raise IntegrationError("non-finite density matrix", z=z)
    hermiticity = float(np.max(np.abs(rho - rho.conj().T)))
    if hermiticity > HERMITICITY_TOLERANCE:
        raise IntegrationError(f"Hermiticity drift {hermiticity:.3g}", z=z)
    trace = np.trace(rho).real
    if include_jumps and abs(trace - 1.0) > TRACE_TOLERANCE:
        raise IntegrationError(f"trace drift {trace - 1.0:.3g}; reduce the step", z=z)
    if not include_jumps and trace > 1.0 + TRACE_TOLERANCE:
        raise IntegrationError(f"trace grew to {trace:.12g} without jumps; reduce the step", z=z)
    smallest = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    if smallest < EIGENVALUE_FLOOR:
        raise IntegrationError(f"negative eigenvalue {smallest:.3g}; raise the truncation or reduce the step", z=z)
    logger.debug("z=%.6g trace-1=%.3g hermiticity=%.3g min_eig=%.3g", z, trace - 1.0, hermiticity, smallest)


def _warn_cap_shell(populations: np.ndarray, edge: np.ndarray, what: str) -> None:
    if edge.size == 0:
        return
    weight = float(np.sum(populations[edge]))
    if weight > CAP_SHELL_WARNING:
        logger.warning("%s: truncation shell holds population %.3g; raise the photon-number cap", what, weight)


def evolve_master(
    params: ModelParams,
    rho0: Optional[DensityMatrix] = None,
    *,
    include_jumps: bool = True,
    keep_states: bool = False,
) -> Trajectory:
    """
    Integrates the master equation of params.scheme along params.z_grid.

    Args:
        params (ModelParams): Model parameters.
        rho0 (DensityMatrix, optional): Initial state; defaults to vacuum.
        include_jumps (bool): False drops the recycling term and evolves only H_eff.
        keep_states (bool): Keep a DensityMatrix per sample.

    Returns:
        Trajectory: One record per sample.

    Raises:
        ValueError: If rho0 is not a valid state.
        BasisError: If rho0 lives on a basis lacking the scheme's modes.
        IntegrationError: On trace drift, Hermiticity drift, a negative eigenvalue or non-finite values.
    """
    basis = rho0.basis if rho0 is not None else params.basis()
    model = build_system(params, basis)
    rho0 = rho0 or DensityMatrix.vacuum(basis)
    model.check(rho0.matrix, 2)
    _check_initial_density(rho0)
    rhs = model.lindblad_rhs if include_jumps else model.von_neumann_eff
    step = default_step(params)
    grid = params.z_grid
    logger.info(
        "master equation: scheme=%s dim=%d theta=%.6g step=%.3g jumps=%s",
        params.scheme.value, basis.dim, params.theta, step, include_jumps,
    )
    records, states = [], []
    rho = np.array(rho0.matrix)
    steps = 0
    for z, rho, steps in _march(rhs, rho, grid, step):
        _check_density(rho, z, include_jumps)
        records.append(CorrelationExtractor.from_arrays(basis, z, params.theta, rho=rho))
        if keep_states:
            states.append(DensityMatrix(basis, rho))
    _warn_cap_shell(np.real(np.diag(rho)), basis.edge_indices, "master equation")
    logger.info("master equation done: %d steps, %d samples", steps, len(records))
    return Trajectory(grid, records, params.scheme, params, states if keep_states else None)


def evolve_nhh(
    params: ModelParams,
    psi0: Optional[StateVector] = None,
    *,
    normalize: bool = False,
    keep_states: bool = False,
) -> Trajectory:
    """
    Integrates the Schrodinger equation with H_eff along params.z_grid.

    Expectation values come from the unnormalized state unless normalize is set.

    Args:
        params (ModelParams): Model parameters; the three-mode scheme is not supported.
        psi0 (StateVector, optional): Initial state; defaults to vacuum.
        normalize (bool): Normalize the state before extracting each record.
        keep_states (bool): Keep the unnormalized StateVector per sample.

    Returns:
        Trajectory: One record per sample.

    Raises:
        SchemeError: For the three-mode scheme.
        ValueError: If psi0 is not normalized.
        IntegrationError: If the norm grows or values stop being finite.
    """
    if params.scheme is Scheme.THREE_MODE:
        raise SchemeError("the three-mode model has no non-Hermitian companion")
    basis = psi0.basis if psi0 is not None else params.basis()
    model = build_system(params, basis)
    psi0 = psi0 or StateVector.vacuum(basis)
    model.check(psi0.amplitudes, 1)
    if abs(psi0.norm() - 1.0) > INITIAL_TOLERANCE:
        raise ValueError(f"initial state has norm {psi0.norm():.12g}")
    step = default_step(params)
    grid = params.z_grid
    logger.info("NHH: dim=%d theta=%.6g step=%.3g normalize=%s", basis.dim, params.theta, step, normalize)
    records, states = [], []
    previous_norm = 1.0
    psi = np.array(psi0.amplitudes)
    steps = 0
    for z, psi, steps in _march(model.nhh_rhs, psi, grid, step):
        if not np.all(np.isfinite(psi)):
            raise IntegrationError("non-finite state vector", z=z)
        norm = float(np.linalg.norm(psi))
        if norm > previous_norm * (1.0 + NORM_GROWTH_TOLERANCE):
            raise IntegrationError(f"norm grew from {previous_norm:.12g} to {norm:.12g}", z=z)
        previous_norm = norm
        shown = psi / norm if normalize and norm > 0 else psi
        records.append(CorrelationExtractor.from_arrays(basis, z, params.theta, psi=shown))
        if keep_states:
            states.append(StateVector(basis, psi))
        logger.debug("z=%.6g norm=%.12g", z, norm)
    _warn_cap_shell(np.abs(psi) ** 2, basis.edge_indices, "NHH")
    logger.info("NHH done: %d steps, final norm %.6g", steps, previous_norm)
    return Trajectory(grid, records, Scheme.ANTIPT_NHH if params.scheme is Scheme.ANTIPT_MASTER else params.scheme,
                      params, states if keep_states else None)


def evolve_gaussian(
    params: ModelParams, initial: Optional[CovarianceState] = None, *, keep_states: bool = False
) -> Trajectory:
    """
    Propagates second moments exactly and Wick-expands the correlations.

    Raises:
        SchemeError: For the NHH scheme.
    """
    grid = params.z_grid
    logger.info("gaussian: scheme=%s theta=%.6g samples=%d", params.scheme.value, params.theta, len(grid))
    covariances = moment_ode(params, grid, initial)
    records = [CorrelationExtractor.from_covariance(cov, params.theta) for cov in covariances]
    return Trajectory(grid, records, params.scheme, params, covariances if keep_states else None)


def evolve_classical(
    gamma: float, amplitudes0: Tuple[complex, complex], z_grid: Sequence[float]
) -> ClassicalTrajectory:
    """
    Classical limit d(a, b)/dz = -Gamma (a + b, a + b).

    The sum s = a + b decays as e^{-2 Gamma z} and the difference a - b is conserved.

    Args:
        gamma (float): Dissipative coupling (m^-1), >= 0.
        amplitudes0 (Tuple[complex, complex]): Input amplitudes (a0, b0).
        z_grid (Sequence[float]): Positions (m).

    Returns:
        ClassicalTrajectory: Amplitudes on the grid.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    z = np.asarray(z_grid, dtype=float)
    a0, b0 = (complex(x) for x in amplitudes0)
    loss = 0.5 * (a0 + b0) * (1.0 - np.exp(-2.0 * gamma * z))
    return ClassicalTrajectory(z, a0 - loss, b0 - loss)
