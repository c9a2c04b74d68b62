"""
Hamiltonians and Liouvillian right-hand sides.

This module builds the SPDC pair-generation term, the eliminated anti-PT
dissipative coupling, the Hermitian coherent reference, the bright/dark form of
the nonlinear term and the three-mode model the dissipative coupling is
eliminated from. All operators are sparse matrices on a FockBasis.
"""

import cmath
import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy import sparse

from antipt_spdc.enums import (
    FREQUENCIES,
    THREE_MODE_MODES,
    WAVEGUIDE_MODES,
    LadderKind,
    Mode,
    Scheme,
)
from antipt_spdc.exceptions import BasisError
from antipt_spdc.fock import DensityMatrix, FockBasis, StateVector, build_basis, dagger, ladder
from antipt_spdc.helpers import wrap_phase

logger = logging.getLogger(__name__)

# Reference operating point, SI units
REFERENCE_G_EPS = 6.93          # m^-1
REFERENCE_GAMMA = 722.0         # m^-1 (7.22 cm^-1)
REFERENCE_LENGTH = 4e-3         # m
REFERENCE_KAPPA = 7662.0        # m^-1 (76.62 cm^-1)
REFERENCE_GAMMA_C = 81300.0     # m^-1 (813 cm^-1)

DEFAULT_PER_MODE_CAP = 6
DEFAULT_TOTAL_CAP = 6
DEFAULT_SAMPLES = 41

# Below this gamma_c/kappa ratio the eliminated model is not trustworthy
ELIMINATION_WARN_RATIO = 5.0


@dataclass(frozen=True)
class ModelParams:
    """
    Physical and numerical parameters shared by every solver.

    Attributes:
        g_eps (float): Pair-generation strength per length (m^-1).
        gamma (float): Effective dissipative coupling Gamma (m^-1).
        theta (float): Pump relative phase, wrapped to [0, 2*pi).
        scheme (Scheme): Physical model.
        kappa (Optional[float]): Hopping rate to waveguide c (m^-1), three-mode only.
        gamma_c (Optional[float]): Amplitude loss rate of waveguide c (m^-1), three-mode only.
        per_mode_cap (int): Fock truncation per mode.
        total_cap (Optional[int]): Fock truncation on the total photon number.
        length (float): Propagation length (m) of the default uniform z grid.
        samples (int): Number of points of the default uniform z grid.
        z_points (Optional[Tuple[float, ...]]): Explicit z grid overriding length/samples.
        step (Optional[float]): RK4 step override (m).
    """
    g_eps: float = REFERENCE_G_EPS
    gamma: float = REFERENCE_GAMMA
    theta: float = 0.0
    scheme: Scheme = Scheme.ANTIPT_MASTER
    kappa: Optional[float] = None
    gamma_c: Optional[float] = None
    per_mode_cap: int = DEFAULT_PER_MODE_CAP
    total_cap: Optional[int] = DEFAULT_TOTAL_CAP
    length: float = REFERENCE_LENGTH
    samples: int = DEFAULT_SAMPLES
    z_points: Optional[Tuple[float, ...]] = None
    step: Optional[float] = None

    def __post_init__(self) -> None:
        if self.g_eps < 0:
            raise ValueError("g_eps must be >= 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.scheme is Scheme.THREE_MODE:
            if self.kappa is None or self.gamma_c is None:
                raise ValueError("three-mode scheme needs kappa and gamma_c")
            if self.kappa < 0:
                raise ValueError("kappa must be >= 0")
            if self.gamma_c <= 0:
                raise ValueError("gamma_c must be > 0")
        if self.step is not None and self.step <= 0:
            raise ValueError("step must be > 0")
        object.__setattr__(self, "theta", wrap_phase(float(self.theta)))
        if self.z_points is not None:
            points = tuple(float(z) for z in self.z_points)
            if len(points) < 1 or points[0] != 0.0:
                raise ValueError("z_points must start at 0")
            if any(b <= a for a, b in zip(points[:-1], points[1:])):
                raise ValueError("z_points must be strictly increasing")
            object.__setattr__(self, "z_points", points)
        else:
            if self.length <= 0:
                raise ValueError("length must be > 0")
            if self.samples < 2:
                raise ValueError("samples must be >= 2")

    @property
    def z_grid(self) -> np.ndarray:
        if self.z_points is not None:
            return np.array(self.z_points)
        return np.linspace(0.0, self.length, self.samples)

    @property
    def modes(self) -> Tuple[Mode, ...]:
        return THREE_MODE_MODES if self.scheme is Scheme.THREE_MODE else WAVEGUIDE_MODES

    @property
    def effective_gamma(self) -> float:
        """Gamma seen by the waveguide pair; kappa^2/gamma_c for the three-mode scheme."""
        if self.scheme is Scheme.THREE_MODE:
            return self.kappa ** 2 / self.gamma_c
        return self.gamma

    def max_rate(self) -> float:
        return max(self.gamma, self.g_eps, self.kappa or 0.0, self.gamma_c or 0.0)

    def basis(self) -> FockBasis:
        return build_basis(self.modes, self.per_mode_cap, self.total_cap)

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class NonlinearCoeffs:
    """
    Co-generation and cross-generation amplitudes of the bright/dark nonlinear term.

    Attributes:
        lambda_co (complex): Amplitude of B_s^dag B_i^dag and D_s^dag D_i^dag.
        lambda_x (complex): Amplitude of B_s^dag D_i^dag and D_s^dag B_i^dag.
    """
    lambda_co: complex
    lambda_x: complex


def nonlinear_coeffs(g_eps: float, theta: float) -> NonlinearCoeffs:
    """Returns (g_eps/2)(e^{i theta} + 1) and (g_eps/2)(e^{i theta} - 1)."""
    phase = cmath.exp(1j * theta)
    return NonlinearCoeffs(0.5 * g_eps * (phase + 1.0), 0.5 * g_eps * (phase - 1.0))


def _annihilators(basis: FockBasis, modes=WAVEGUIDE_MODES):
    basis.require(modes)
    return [ladder(basis, mode, LadderKind.ANNIHILATE) for mode in modes]


def _pair_term(amplitude: complex, first: sparse.csr_matrix, second: sparse.csr_matrix) -> sparse.csr_matrix:
    # amplitude * first^dag second^dag + h.c.
    annihilate = (first @ second).tocsr()
    return (amplitude * dagger(annihilate) + np.conj(amplitude) * annihilate).tocsr()


def build_h_nl(params: ModelParams, basis: FockBasis) -> sparse.csr_matrix:
    """
    Builds the SPDC pair-generation Hamiltonian of both waveguides.

    H = g_eps (e^{i theta} a_s^dag a_i^dag + h.c.) + g_eps (b_s^dag b_i^dag + h.c.)

    Raises:
        BasisError: If a waveguide mode is missing.
    """
    a_s, a_i, b_s, b_i = _annihilators(basis)
    phase = cmath.exp(1j * params.theta)
    return (_pair_term(params.g_eps * phase, a_s, a_i) + _pair_term(params.g_eps, b_s, b_i)).tocsr()


def _bright_channel(basis: FockBasis, frequency: str) -> sparse.csr_matrix:
    a = ladder(basis, Mode.of("a", frequency), LadderKind.ANNIHILATE)
    b = ladder(basis, Mode.of("b", frequency), LadderKind.ANNIHILATE)
    return (a + b).tocsr()


def build_h_linear_eff(params: ModelParams, basis: FockBasis) -> sparse.csr_matrix:
    """
    Builds the eliminated anti-PT coupling -i Gamma sum_mu (a_mu + b_mu)^dag (a_mu + b_mu).
    """
    basis.require(WAVEGUIDE_MODES)
    h = sparse.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for frequency in FREQUENCIES:
        channel = _bright_channel(basis, frequency)
        h = h + (dagger(channel) @ channel)
    return (-1j * params.gamma * h).tocsr()


def build_h_coherent(params: ModelParams, basis: FockBasis) -> sparse.csr_matrix:
    """
    Builds the Hermitian reference H_NL + Gamma sum_mu (a_mu^dag b_mu + a_mu b_mu^dag).
    """
    h = build_h_nl(params, basis)
    for frequency in FREQUENCIES:
        a = ladder(basis, Mode.of("a", frequency), LadderKind.ANNIHILATE)
        b = ladder(basis, Mode.of("b", frequency), LadderKind.ANNIHILATE)
        hop = (dagger(a) @ b).tocsr()
        h = h + params.gamma * (hop + dagger(hop))
    return h.tocsr()


def build_h_nl_bd(
    params: ModelParams, basis: FockBasis, coeffs: Optional[NonlinearCoeffs] = None
) -> sparse.csr_matrix:
    """
    Builds the nonlinear Hamiltonian in the bright/dark representation.

    The slots of a_mu and b_mu hold B_mu and D_mu respectively, matching
    fock.bd_transform.

    Args:
        params (ModelParams): Model parameters.
        basis (FockBasis): Basis whose a/b slots are read as B/D.
        coeffs (NonlinearCoeffs, optional): Overrides the amplitudes derived from params.

    Returns:
        sparse.csr_matrix: Lambda_co (B_s^dag B_i^dag + D_s^dag D_i^dag)
        + Lambda_x (B_s^dag D_i^dag + D_s^dag B_i^dag) + h.c.
    """
    coeffs = coeffs or nonlinear_coeffs(params.g_eps, params.theta)
    bright_s, bright_i, dark_s, dark_i = _annihilators(basis)
    h = (
        _pair_term(coeffs.lambda_co, bright_s, bright_i)
        + _pair_term(coeffs.lambda_co, dark_s, dark_i)
        + _pair_term(coeffs.lambda_x, bright_s, dark_i)
        + _pair_term(coeffs.lambda_x, dark_s, bright_i)
    )
    return h.tocsr()


@dataclass(frozen=True, eq=False)
class SystemModel:
    """
    Hamiltonian plus collapse operators of one scheme on one basis.

    Attributes:
        basis (FockBasis): Basis of every operator.
        hamiltonian (sparse.csr_matrix): Hermitian part.
        collapse_ops (Tuple[sparse.csr_matrix, ...]): Lindblad operators L_k.
        scheme (Scheme): Scheme the model was built for.
        h_eff (sparse.csr_matrix): H - (i/2) sum_k L_k^dag L_k.
    """
    basis: FockBasis
    hamiltonian: sparse.csr_matrix
    collapse_ops: Tuple[sparse.csr_matrix, ...]
    scheme: Scheme
    h_eff: sparse.csr_matrix = field(init=False, repr=False)

    def __post_init__(self) -> None:
        h_eff = self.hamiltonian.astype(complex)
        for op in self.collapse_ops:
            h_eff = h_eff - 0.5j * (dagger(op) @ op)
        object.__setattr__(self, "h_eff", h_eff.tocsr())

    def check(self, array: np.ndarray, ndim: int) -> None:
        expected = (self.basis.dim,) * ndim
        if array.shape != expected:
            raise BasisError(f"array shape {array.shape} does not match basis shape {expected}")

    def von_neumann_eff(self, rho: np.ndarray) -> np.ndarray:
        """-i (H_eff rho - rho H_eff^dag) for a Hermitian rho."""
        x = -1j * (self.h_eff @ rho)
        return x + x.conj().T

    def jump_term(self, rho: np.ndarray) -> np.ndarray:
        """sum_k L_k rho L_k^dag for a Hermitian rho."""
        out = np.zeros_like(rho, dtype=complex)
        for op in self.collapse_ops:
            out += op @ (op @ rho).conj().T
        return out

    def lindblad_rhs(self, rho: np.ndarray) -> np.ndarray:
        return self.von_neumann_eff(rho) + self.jump_term(rho)

    def nhh_rhs(self, psi: np.ndarray) -> np.ndarray:
        return -1j * (self.h_eff @ psi)


def build_three_mode_model(params: ModelParams, basis6: FockBasis) -> SystemModel:
    """
    Builds the model with the lossy middle waveguide c kept explicitly.

    H = H_NL + kappa sum_mu (a_mu^dag c_mu + b_mu^dag c_mu + h.c.) with
    collapse operators sqrt(2 gamma_c) c_mu, so that eliminating c gives the
    anti-PT rate 2 Gamma with Gamma = kappa^2 / gamma_c.

    Raises:
        BasisError: If the c modes are missing.
        ValueError: If kappa or gamma_c are missing or not positive.
    """
    basis6.require(THREE_MODE_MODES)
    if params.kappa is None or params.gamma_c is None:
        raise ValueError("three-mode model needs kappa and gamma_c")
    if params.kappa < 0 or params.gamma_c <= 0:
        raise ValueError("three-mode model needs kappa >= 0 and gamma_c > 0")
    if params.kappa > 0 and params.gamma_c / params.kappa < ELIMINATION_WARN_RATIO:
        logger.warning(
            "gamma_c/kappa = %.3g is below %.1f; the eliminated model may not apply",
            params.gamma_c / params.kappa, ELIMINATION_WARN_RATIO,
        )
    h = build_h_nl(params, basis6)
    collapse = []
    for frequency in FREQUENCIES:
        c = ladder(basis6, Mode.of("c", frequency), LadderKind.ANNIHILATE)
        hop = (dagger(_bright_channel(basis6, frequency)) @ c).tocsr()
        h = h + params.kappa * (hop + dagger(hop))
        collapse.append((math.sqrt(2.0 * params.gamma_c) * c).tocsr())
    return SystemModel(basis6, h.tocsr(), tuple(collapse), Scheme.THREE_MODE)


def build_system(params: ModelParams, basis: Optional[FockBasis] = None) -> SystemModel:
    """
    Builds the SystemModel of params.scheme.

    Args:
        params (ModelParams): Model parameters.
        basis (FockBasis, optional): Defaults to params.basis().

    Returns:
        SystemModel: Hamiltonian and collapse operators.
    """
    basis = basis or params.basis()
    return _cached_system(
        params.scheme, params.g_eps, params.gamma, params.theta, params.kappa, params.gamma_c, basis
    )


@lru_cache(maxsize=16)
def _cached_system(scheme, g_eps, gamma, theta, kappa, gamma_c, basis) -> SystemModel:
    params = ModelParams(g_eps=g_eps, gamma=gamma, theta=theta, scheme=scheme, kappa=kappa, gamma_c=gamma_c)
    if scheme is Scheme.THREE_MODE:
        return build_three_mode_model(params, basis)
    if scheme is Scheme.COHERENT:
        return SystemModel(basis, build_h_coherent(params, basis), (), scheme)
    collapse = tuple(
        (math.sqrt(2.0 * gamma) * _bright_channel(basis, frequency)).tocsr() for frequency in FREQUENCIES
    )
    return SystemModel(basis, build_h_nl(params, basis), collapse, scheme)


def lindblad_rhs(params: ModelParams, rho: DensityMatrix) -> np.ndarray:
    """
    Master-equation derivative -i[H, rho] + sum_k D[L_k] rho of params.scheme.

    For the anti-PT schemes this is -i[H_NL, rho] + 2 Gamma sum_mu D[a_mu + b_mu] rho.

    Raises:
        BasisError: If rho lives on a basis lacking the scheme's modes.
    """
    return build_system(params, rho.basis).lindblad_rhs(rho.matrix)


def nhh_rhs(params: ModelParams, psi: StateVector) -> np.ndarray:
    """Schrodinger derivative -i H_eff psi; for anti-PT H_eff = H_NL + H_L'."""
    return build_system(params, psi.basis).nhh_rhs(psi.amplitudes)


def jump_term(params: ModelParams, rho: DensityMatrix) -> np.ndarray:
    """Recycling term sum_k L_k rho L_k^dag of the master equation."""
    return build_system(params, rho.basis).jump_term(rho.matrix)
