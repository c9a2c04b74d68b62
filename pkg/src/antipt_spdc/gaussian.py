"""
Gaussian moment engine.

Closed-form transfer matrices of the coherent and anti-PT systems at
theta in {0, pi}, their vacuum-noise contributions and kernels, a general
second-moment ODE for any quadratic scheme, and Wick expansion of
normally ordered moments through the hafnian.

Transfer matrices act on V = [a_s, b_s, a_i^dag, b_i^dag]. Covariance blocks
are indexed by modes (a_s, b_s, a_i, b_i), optionally followed by (c_s, c_i).
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad, quad_vec
from scipy.linalg import expm
from thewalrus import hafnian

from antipt_spdc.enums import Mode, Scheme, ThetaCase, TransferFamily
from antipt_spdc.exceptions import BasisError, GaussianStateError, RegimeError, SchemeError
from antipt_spdc.model import ModelParams

logger = logging.getLogger(__name__)

GAUSSIAN_MODES: Tuple[Mode, ...] = (Mode.A_S, Mode.B_S, Mode.A_I, Mode.B_I)
THREE_MODE_GAUSSIAN_MODES: Tuple[Mode, ...] = GAUSSIAN_MODES + (Mode.C_S, Mode.C_I)

ETA = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)

# Vacuum input on V: <V V^dag> and <V^dag V>
_S_VACUUM = np.diag([1.0, 1.0, 0.0, 0.0]).astype(complex)
_P_VACUUM = np.diag([0.0, 0.0, 1.0, 1.0]).astype(complex)

_SIGNAL = slice(0, 2)
_IDLER = slice(2, 4)

# P' swaps a and b within each frequency; Q carries the pair generation at theta = pi
_SWAP = np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_SWAP_CONJ = np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, -1, 0]], dtype=complex)
_Q = np.array([[0, 0, 1j, 0], [0, 0, 0, -1j], [-1j, 0, 0, 0], [0, 1j, 0, 0]], dtype=complex)

QUAD_EPSABS = 1e-14
QUAD_EPSREL = 1e-12
# relative to the largest block entry
STATE_TOLERANCE = 1e-10

MAX_WICK_LENGTH = 8

G4_SPEC: Tuple[Tuple[Mode, bool], ...] = (
    (Mode.A_S, True), (Mode.A_I, True), (Mode.B_S, True), (Mode.B_I, True),
    (Mode.B_I, False), (Mode.B_S, False), (Mode.A_I, False), (Mode.A_S, False),
)


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """
    Bogoliubov propagator on [a_s, b_s, a_i^dag, b_i^dag].

    Attributes:
        m (np.ndarray): 4x4 complex matrix.
        z (float): Position (m).
        family (TransferFamily): Closed-form family or NUMERIC.
    """
    m: np.ndarray
    z: float
    family: TransferFamily

    def bogoliubov_defect(self) -> float:
        """Largest entry of |m eta m^dag - eta|."""
        return float(np.max(np.abs(self.m @ ETA @ self.m.conj().T - ETA)))

    def __repr__(self):
        return f"<TransferMatrix family={self.family.value} z={self.z:.6g}>"


@dataclass(frozen=True, eq=False)
class CovarianceState:
    """
    Zero-mean Gaussian state described by its second moments.

    Attributes:
        n_block (np.ndarray): N_ij = <a_i^dag a_j>, Hermitian.
        m_block (np.ndarray): M_ij = <a_i a_j>, symmetric.
        z (float): Position (m).
        modes (Tuple[Mode, ...]): Mode order of both blocks.

    Raises:
        BasisError: If a block does not match the mode count.
        GaussianStateError: If N is not Hermitian positive semidefinite or M is not symmetric.
    """
    n_block: np.ndarray
    m_block: np.ndarray
    z: float = 0.0
    modes: Tuple[Mode, ...] = GAUSSIAN_MODES

    def __post_init__(self) -> None:
        k = len(self.modes)
        n_block = np.array(self.n_block, dtype=complex)
        m_block = np.array(self.m_block, dtype=complex)
        if n_block.shape != (k, k) or m_block.shape != (k, k):
            raise BasisError(f"covariance blocks must be {k}x{k}")
        tolerance = STATE_TOLERANCE * max(1.0, float(np.max(np.abs(n_block))), float(np.max(np.abs(m_block))))
        if np.max(np.abs(n_block - n_block.conj().T)) > tolerance:
            raise GaussianStateError("N block is not Hermitian")
        if np.max(np.abs(m_block - m_block.T)) > tolerance:
            raise GaussianStateError("M block is not symmetric")
        if np.linalg.eigvalsh(0.5 * (n_block + n_block.conj().T))[0] < -tolerance:
            raise GaussianStateError("N block has a negative eigenvalue")
        n_block.setflags(write=False)
        m_block.setflags(write=False)
        object.__setattr__(self, "n_block", n_block)
        object.__setattr__(self, "m_block", m_block)
        object.__setattr__(self, "modes", tuple(self.modes))

    @classmethod
    def vacuum(cls, modes: Sequence[Mode] = GAUSSIAN_MODES, z: float = 0.0) -> "CovarianceState":
        k = len(modes)
        return cls(np.zeros((k, k)), np.zeros((k, k)), z, tuple(modes))

    def index(self, mode: Mode) -> int:
        try:
            return self.modes.index(mode)
        except ValueError:
            raise BasisError(f"mode {mode.value} is not in the covariance state") from None

    def mean_photon_number(self, mode: Mode) -> float:
        i = self.index(mode)
        return float(self.n_block[i, i].real)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.n_block - self.n_block.conj().T)))

    def symmetry_error(self) -> float:
        return float(np.max(np.abs(self.m_block - self.m_block.T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.n_block + self.n_block.conj().T))[0])

    def restrict(self, modes: Sequence[Mode]) -> "CovarianceState":
        """Marginal on a subset of modes."""
        idx = [self.index(mode) for mode in modes]
        return CovarianceState(self.n_block[np.ix_(idx, idx)], self.m_block[np.ix_(idx, idx)], self.z, tuple(modes))

    def __add__(self, other: "CovarianceState") -> "CovarianceState":
        if self.modes != other.modes:
            raise BasisError("cannot add covariance states over different modes")
        return CovarianceState(self.n_block + other.n_block, self.m_block + other.m_block, self.z, self.modes)

    def __repr__(self):
        occupations = ", ".join(f"{mode.value}={self.n_block[i, i].real:.4g}" for i, mode in enumerate(self.modes))
        return f"<CovarianceState z={self.z:.6g} {occupations}>"


@dataclass(frozen=True)
class NoiseKernels:
    """
    Kernels propagating the bright-mode vacuum noise over a separation xi.

    Attributes:
        k0 (Callable[[float], float]): Direct kernel, k0(0) = 1.
        k1 (Callable[[float], float]): Conjugate kernel, k1(0) = 0.
        family (TransferFamily): M3 (theta = 0) or M4 (theta = pi).
    """
    k0: Callable[[float], float]
    k1: Callable[[float], float]
    family: TransferFamily


# Closed forms ---------------------------------------------------------------

def _omega(params: ModelParams) -> float:
    if params.gamma <= params.g_eps:
        raise RegimeError(
            f"coherent theta=0 solution needs Gamma > g_eps (Gamma={params.gamma}, g_eps={params.g_eps})"
        )
    return math.sqrt(params.gamma ** 2 - params.g_eps ** 2)


def _k(params: ModelParams) -> float:
    return math.hypot(params.gamma, params.g_eps)


def _require_dissipation(params: ModelParams) -> None:
    if params.gamma <= 0:
        raise RegimeError("anti-PT solutions need Gamma > 0")


def n_coherent_theta0(params: ModelParams, z: float) -> float:
    """(g_eps/Omega)^2 sin^2(Omega z)."""
    omega = _omega(params)
    return (params.g_eps / omega) ** 2 * math.sin(omega * z) ** 2


def g4_coherent_theta0(params: ModelParams, z: float) -> float:
    """Closed-form G4 of the coherent system at theta = 0."""
    omega = _omega(params)
    g = params.g_eps
    s = math.sin(omega * z)
    ratio = g / omega
    return ratio ** 8 * 4.0 * params.gamma ** 2 / g ** 2 * s ** 8 + ratio ** 4 * math.cos(2.0 * omega * z) ** 2 * s ** 4


def n_coherent_pi(params: ModelParams, z: float) -> float:
    """sinh^2(g_eps z), independent of Gamma."""
    return math.sinh(params.g_eps * z) ** 2


def g4_coherent_pi(params: ModelParams, z: float) -> float:
    """sinh^4(g_eps z) cosh^2(2 g_eps z)."""
    x = params.g_eps * z
    return math.sinh(x) ** 4 * math.cosh(2.0 * x) ** 2


def n_antipt_theta0_det(params: ModelParams, z: float) -> float:
    """Deterministic part 0.5 sinh^2(g_eps z)(1 + e^{-4 Gamma z})."""
    return 0.5 * math.sinh(params.g_eps * z) ** 2 * (1.0 + math.exp(-4.0 * params.gamma * z))


def _decay_ratio(rate: float, z: float) -> float:
    # (1 - e^{-2 rate z}) / rate, continuous at rate = 0
    if rate == 0.0:
        return 2.0 * z
    return -math.expm1(-2.0 * rate * z) / rate


def n_antipt_theta0_vac(params: ModelParams, z: float) -> float:
    """
    Vacuum-noise part at theta = 0: 2 Gamma int_0^z e^{-4 Gamma t} sinh^2(g_eps t) dt.
    """
    _require_dissipation(params)
    gamma, g = params.gamma, params.g_eps
    x = _decay_ratio(2.0 * gamma - g, z)
    y = _decay_ratio(2.0 * gamma + g, z)
    w = _decay_ratio(2.0 * gamma, z)
    return 0.25 * gamma * (x + y - 2.0 * w)


def n_antipt_pi_det(params: ModelParams, z: float) -> float:
    """Deterministic part (g_eps/k)^2 sinh^2(k z) e^{-2 Gamma z}."""
    k = _k(params)
    return (params.g_eps / k) ** 2 * math.sinh(k * z) ** 2 * math.exp(-2.0 * params.gamma * z)


def n_antipt_pi_vac(params: ModelParams, z: float) -> float:
    """Vacuum-noise part at theta = pi."""
    _require_dissipation(params)
    k = _k(params)
    gamma, g = params.gamma, params.g_eps
    bracket = (gamma / k) ** 2 * math.cosh(2.0 * k * z) + (gamma / k) * math.sinh(2.0 * k * z) + (g / k) ** 2
    return -0.5 + 0.5 * math.exp(-2.0 * gamma * z) * bracket


# Transfer matrices ----------------------------------------------------------

def transfer_coherent_theta0(params: ModelParams, z: float) -> TransferMatrix:
    """
    Transfer matrix of the coherent system at theta = 0.

    Raises:
        RegimeError: If Gamma <= g_eps.
    """
    omega = _omega(params)
    u = math.cos(omega * z)
    s = math.sin(omega * z) / omega
    v = -1j * params.gamma * s
    w = -1j * params.g_eps * s
    m = np.array(
        [
            [u, v, w, 0],
            [v, u, 0, w],
            [-w, 0, u, -v],
            [0, -w, -v, u],
        ],
        dtype=complex,
    )
    return TransferMatrix(m, z, TransferFamily.M1)


def transfer_coherent_pi(params: ModelParams, z: float) -> TransferMatrix:
    """Transfer matrix of the coherent system at theta = pi: (c_G I - i s_G P')(C I + S Q)."""
    x = params.g_eps * z
    hopping = math.cos(params.gamma * z) * np.eye(4) - 1j * math.sin(params.gamma * z) * _SWAP_CONJ
    squeezing = math.cosh(x) * np.eye(4) + math.sinh(x) * _Q
    return TransferMatrix(hopping @ squeezing, z, TransferFamily.M2)


def _transfer_m3(params: ModelParams, z: float) -> np.ndarray:
    c = math.cosh(params.g_eps * z)
    s = math.sinh(params.g_eps * z)
    e = math.exp(-2.0 * params.gamma * z)
    plus_c, minus_c = 0.5 * c * (e + 1.0), 0.5 * c * (e - 1.0)
    plus_s, minus_s = 0.5j * s * (e + 1.0), 0.5j * s * (e - 1.0)
    return np.array(
        [
            [plus_c, minus_c, -plus_s, -minus_s],
            [minus_c, plus_c, -minus_s, -plus_s],
            [plus_s, minus_s, plus_c, minus_c],
            [minus_s, plus_s, minus_c, plus_c],
        ],
        dtype=complex,
    )


def _transfer_m4(params: ModelParams, z: float) -> np.ndarray:
    k = _k(params)
    generator = -params.gamma * _SWAP + params.g_eps * _Q
    return math.exp(-params.gamma * z) * (math.cosh(k * z) * np.eye(4) + math.sinh(k * z) / k * generator)


def _antipt_transfer(params: ModelParams, z: float, theta_case: ThetaCase) -> TransferMatrix:
    if theta_case is ThetaCase.ZERO:
        return TransferMatrix(_transfer_m3(params, z), z, TransferFamily.M3)
    return TransferMatrix(_transfer_m4(params, z), z, TransferFamily.M4)


def drift_matrix(params: ModelParams) -> np.ndarray:
    """
    Drift W of dV/dz = W V for the 4-mode anti-PT or coherent scheme at any theta.
    """
    generator = quadratic_generator(params)
    if len(generator.modes) != 4:
        raise SchemeError("drift_matrix covers the 4-mode schemes only")
    a = generator.drift
    g = generator.g
    w = np.zeros((4, 4), dtype=complex)
    w[_SIGNAL, _SIGNAL] = a[_SIGNAL, _SIGNAL]
    w[_SIGNAL, _IDLER] = -1j * g[_SIGNAL, _IDLER]
    w[_IDLER, _IDLER] = a[_IDLER, _IDLER].conj()
    w[_IDLER, _SIGNAL] = 1j * g[_IDLER, _SIGNAL].conj()
    return w


def transfer_numeric(params: ModelParams, z: float) -> TransferMatrix:
    """expm(W z) for any theta."""
    return TransferMatrix(expm(drift_matrix(params) * z), z, TransferFamily.NUMERIC)


def noise_diffusion(params: ModelParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    Diffusion matrices (D_S, D_P) of the collective vacuum noise on V.

    D_S enters <V V^dag> through the signal annihilators and D_P enters
    <V^dag V> through the idler creators; both are 2 Gamma [[1, 1], [1, 1]].
    """
    block = 2.0 * params.gamma * np.ones((2, 2), dtype=complex)
    d_s = np.zeros((4, 4), dtype=complex)
    d_p = np.zeros((4, 4), dtype=complex)
    d_s[_SIGNAL, _SIGNAL] = block
    d_p[_IDLER, _IDLER] = block
    return d_s, d_p


def vacuum_noise_moments(
    params: ModelParams, z: float, theta_case: ThetaCase
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Second moments (<F F^dag>, <F^dag F>) of the accumulated noise vector F(z).

    Computed by adaptive quadrature of M(t) D_S M(t)^dag and conj(M(t)) D_P M(t)^T.

    Raises:
        RegimeError: If Gamma <= 0.
    """
    _require_dissipation(params)
    d_s, d_p = noise_diffusion(params)
    if z == 0.0:
        return np.zeros((4, 4), dtype=complex), np.zeros((4, 4), dtype=complex)

    def integrand(t: float) -> np.ndarray:
        m = _antipt_transfer(params, t, theta_case).m
        return np.concatenate([(m @ d_s @ m.conj().T).ravel(), (m.conj() @ d_p @ m.T).ravel()])

    result, _ = quad_vec(integrand, 0.0, z, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL)
    return result[:16].reshape(4, 4), result[16:].reshape(4, 4)


def commutator_matrix(transfer: TransferMatrix, noise: Tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    """<[V_p, V_q^dag]> after propagation; equals eta when the noise restores the commutators."""
    s_noise, p_noise = noise
    return transfer.m @ ETA @ transfer.m.conj().T + s_noise - p_noise.T


def _moments_from_vv(s_matrix: np.ndarray, p_matrix: np.ndarray, z: float) -> CovarianceState:
    # s = <V V^dag>, p = <V^dag V>; signal-idler normal moments vanish (n_s - n_i is conserved)
    n_block = np.zeros((4, 4), dtype=complex)
    m_block = np.zeros((4, 4), dtype=complex)
    n_block[_SIGNAL, _SIGNAL] = p_matrix[_SIGNAL, _SIGNAL]
    n_block[_IDLER, _IDLER] = s_matrix[_IDLER, _IDLER]
    m_block[_SIGNAL, _IDLER] = s_matrix[_SIGNAL, _IDLER]
    m_block[_IDLER, _SIGNAL] = s_matrix[_SIGNAL, _IDLER].T
    return CovarianceState(n_block, m_block, z)


def covariance_from_transfer(
    transfer: TransferMatrix, noise: Optional[CovarianceState] = None
) -> CovarianceState:
    """
    Second moments of the vacuum propagated by a transfer matrix, plus an optional noise contribution.
    """
    m = transfer.m
    state = _moments_from_vv(m @ _S_VACUUM @ m.conj().T, m.conj() @ _P_VACUUM @ m.T, transfer.z)
    return state + noise if noise is not None else state


def transfer_antipt(
    params: ModelParams, z: float, theta_case: ThetaCase
) -> Tuple[TransferMatrix, CovarianceState]:
    """
    Transfer matrix of the anti-PT system at theta = 0 (M3) or pi (M4) and its noise contribution.

    The mean photon numbers of the noise contribution use the closed forms;
    the remaining entries come from quadrature.

    Args:
        params (ModelParams): Model parameters (theta is taken from theta_case).
        z (float): Position (m).
        theta_case (ThetaCase): ZERO or PI.

    Returns:
        Tuple[TransferMatrix, CovarianceState]: Deterministic propagator and noise second moments.

    Raises:
        RegimeError: If Gamma <= 0.
    """
    _require_dissipation(params)
    transfer = _antipt_transfer(params, z, theta_case)
    s_noise, p_noise = vacuum_noise_moments(params, z, theta_case)
    noise = _moments_from_vv(s_noise, p_noise, z)
    n_vac = n_antipt_theta0_vac(params, z) if theta_case is ThetaCase.ZERO else n_antipt_pi_vac(params, z)
    n_block = np.array(noise.n_block)
    np.fill_diagonal(n_block, n_vac)
    return transfer, CovarianceState(n_block, noise.m_block, z)


def noise_kernels(params: ModelParams, theta_case: ThetaCase) -> NoiseKernels:
    """Bright-mode noise kernels of the anti-PT families."""
    _require_dissipation(params)
    gamma, g = params.gamma, params.g_eps
    if theta_case is ThetaCase.ZERO:
        return NoiseKernels(
            k0=lambda xi: math.exp(-2.0 * gamma * xi) * math.cosh(g * xi),
            k1=lambda xi: math.exp(-2.0 * gamma * xi) * math.sinh(g * xi),
            family=TransferFamily.M3,
        )
    k = _k(params)
    return NoiseKernels(
        k0=lambda xi: math.exp(-gamma * xi) * (math.cosh(k * xi) - gamma / k * math.sinh(k * xi)),
        k1=lambda xi: math.exp(-gamma * xi) * g / k * math.sinh(k * xi),
        family=TransferFamily.M4,
    )


def n_vac_from_kernels(kernels: NoiseKernels, gamma: float, z: float) -> float:
    """2 Gamma int_0^z k1(xi)^2 dxi by adaptive quadrature."""
    value, _ = quad(lambda xi: kernels.k1(xi) ** 2, 0.0, z, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL)
    return 2.0 * gamma * value


# General moment ODE ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuadraticGenerator:
    """
    Quadratic model H = a^dag h a + (1/2)(a^dag G a^dag^T + h.c.), L_k = sum_j C_kj a_j.

    Attributes:
        modes (Tuple[Mode, ...]): Mode order.
        h (np.ndarray): Hermitian hopping matrix.
        g (np.ndarray): Symmetric pair-generation matrix.
        collapse (np.ndarray): Rows C_k of the collapse operators.
    """
    modes: Tuple[Mode, ...]
    h: np.ndarray
    g: np.ndarray
    collapse: np.ndarray

    @property
    def damping(self) -> np.ndarray:
        return self.collapse.conj().T @ self.collapse

    @property
    def drift(self) -> np.ndarray:
        return -1j * self.h - 0.5 * self.damping


def quadratic_generator(params: ModelParams) -> QuadraticGenerator:
    """
    Builds the quadratic generator of params.scheme.

    Raises:
        SchemeError: For the NHH scheme, which has no moment closure.
    """
    if params.scheme is Scheme.ANTIPT_NHH:
        raise SchemeError("the non-Hermitian scheme has no Gaussian moment equations")
    modes = THREE_MODE_GAUSSIAN_MODES if params.scheme is Scheme.THREE_MODE else GAUSSIAN_MODES
    k = len(modes)
    pos = {mode: i for i, mode in enumerate(modes)}
    h = np.zeros((k, k), dtype=complex)
    g = np.zeros((k, k), dtype=complex)
    collapse = []

    pair_a = params.g_eps * np.exp(1j * params.theta)
    g[pos[Mode.A_S], pos[Mode.A_I]] = g[pos[Mode.A_I], pos[Mode.A_S]] = pair_a
    g[pos[Mode.B_S], pos[Mode.B_I]] = g[pos[Mode.B_I], pos[Mode.B_S]] = params.g_eps

    for frequency in ("s", "i"):
        a, b = pos[Mode.of("a", frequency)], pos[Mode.of("b", frequency)]
        if params.scheme is Scheme.COHERENT:
            h[a, b] = h[b, a] = params.gamma
        elif params.scheme is Scheme.THREE_MODE:
            c = pos[Mode.of("c", frequency)]
            h[a, c] = h[c, a] = h[b, c] = h[c, b] = params.kappa
            row = np.zeros(k, dtype=complex)
            row[c] = math.sqrt(2.0 * params.gamma_c)
            collapse.append(row)
        else:
            row = np.zeros(k, dtype=complex)
            row[a] = row[b] = math.sqrt(2.0 * params.gamma)
            collapse.append(row)
    collapse_matrix = np.array(collapse, dtype=complex).reshape(len(collapse), k)
    return QuadraticGenerator(modes, h, g, collapse_matrix)


def _moment_derivative(generator: QuadraticGenerator, n, m, m_bar):
    # Linear part of the moment equations; the source -iG / +iG^* is added separately
    a = generator.drift
    a_bar = a.conj()
    g = generator.g
    g_bar = g.conj()
    dn = a_bar @ n + n @ a.T + 1j * g_bar @ m - 1j * m_bar @ g
    dm = a @ m + m @ a.T - 1j * (g @ n + n.T @ g)
    dm_bar = a_bar @ m_bar + m_bar @ a_bar.T + 1j * (g_bar @ n.T + n @ g_bar)
    return dn, dm, dm_bar


@lru_cache(maxsize=8)
def _augmented_generator(params: ModelParams) -> Tuple[np.ndarray, Tuple[Mode, ...]]:
    generator = quadratic_generator(params)
    k = len(generator.modes)
    size = k * k
    linear = np.zeros((3 * size, 3 * size), dtype=complex)
    for col in range(3 * size):
        unit = np.zeros(3 * size, dtype=complex)
        unit[col] = 1.0
        n, m, m_bar = (unit[j * size:(j + 1) * size].reshape(k, k) for j in range(3))
        linear[:, col] = np.concatenate([block.reshape(-1) for block in _moment_derivative(generator, n, m, m_bar)])
    source = np.concatenate(
        [np.zeros(size, dtype=complex), (-1j * generator.g).reshape(-1), (1j * generator.g.conj()).reshape(-1)]
    )
    augmented = np.zeros((3 * size + 1, 3 * size + 1), dtype=complex)
    augmented[:-1, :-1] = linear
    augmented[:-1, -1] = source
    return augmented, generator.modes


def moment_ode(
    params: ModelParams,
    z_grid: Optional[Sequence[float]] = None,
    initial: Optional[CovarianceState] = None,
) -> List[CovarianceState]:
    """
    Solves the closed linear equations for (N, M) of a quadratic scheme.

    The equations follow from the Heisenberg-Langevin drift with vacuum noise
    and are solved exactly through the exponential of the augmented generator.

    Args:
        params (ModelParams): Model parameters; scheme ANTIPT_MASTER, COHERENT or THREE_MODE.
        z_grid (Sequence[float], optional): Sample positions; defaults to params.z_grid.
        initial (CovarianceState, optional): Initial moments; defaults to vacuum.

    Returns:
        List[CovarianceState]: One state per sample.

    Raises:
        SchemeError: For schemes without moment equations.
    """
    key = params.replace(z_points=None, step=None, length=1.0, samples=2, per_mode_cap=0, total_cap=None)
    augmented, modes = _augmented_generator(key)
    k = len(modes)
    initial = initial or CovarianceState.vacuum(modes)
    if initial.modes != modes:
        raise BasisError("initial covariance modes do not match the scheme")
    x0 = np.concatenate(
        [initial.n_block.reshape(-1), initial.m_block.reshape(-1), initial.m_block.conj().reshape(-1), [1.0]]
    )
    grid = params.z_grid if z_grid is None else np.asarray(z_grid, dtype=float)
    size = k * k
    states = []
    for z in grid:
        x = expm(augmented * z) @ x0
        n = x[:size].reshape(k, k)
        m = x[size:2 * size].reshape(k, k)
        states.append(CovarianceState(0.5 * (n + n.conj().T), 0.5 * (m + m.T), float(z), modes))
    logger.debug("moment_ode: scheme=%s, %d samples", params.scheme.value, len(states))
    return states


# Wick expansion -------------------------------------------------------------

def _check_spec(op_spec: Sequence[Tuple[Mode, bool]]) -> None:
    if len(op_spec) % 2:
        raise ValueError("operator spec must have even length")
    if len(op_spec) > MAX_WICK_LENGTH:
        raise ValueError(f"operator spec longer than {MAX_WICK_LENGTH}")
    seen_plain = False
    for _, is_dagger in op_spec:
        if is_dagger and seen_plain:
            raise ValueError("operator spec is not normally ordered")
        seen_plain = seen_plain or not is_dagger


def contraction_matrix(cov: CovarianceState, op_spec: Sequence[Tuple[Mode, bool]]) -> np.ndarray:
    """Symmetric matrix of pairwise contractions of a normally ordered operator string."""
    size = len(op_spec)
    idx = [cov.index(mode) for mode, _ in op_spec]
    contractions = np.zeros((size, size), dtype=complex)
    for p in range(size):
        for q in range(p + 1, size):
            i, j = idx[p], idx[q]
            first_dagger, second_dagger = op_spec[p][1], op_spec[q][1]
            if first_dagger and second_dagger:
                value = np.conj(cov.m_block[i, j])
            elif first_dagger:
                value = cov.n_block[i, j]
            else:
                value = cov.m_block[i, j]
            contractions[p, q] = contractions[q, p] = value
    return contractions


def wick_moment(cov: CovarianceState, op_spec: Sequence[Tuple[Mode, bool]]) -> complex:
    """
    Normally ordered moment of a zero-mean Gaussian state.

    Args:
        cov (CovarianceState): Second moments.
        op_spec (Sequence[Tuple[Mode, bool]]): (mode, is_dagger) pairs, daggers first.

    Returns:
        complex: Hafnian of the contraction matrix.

    Raises:
        ValueError: For odd-length, too long or non-normally-ordered specs.
    """
    op_spec = list(op_spec)
    _check_spec(op_spec)
    if not op_spec:
        return 1.0 + 0.0j
    return complex(hafnian(contraction_matrix(cov, op_spec)))


def g4_from_covariance(cov: CovarianceState) -> float:
    """Unnormalized four-photon correlation <a_s^dag a_i^dag b_s^dag b_i^dag b_i b_s a_i a_s>."""
    return float(wick_moment(cov, G4_SPEC).real)
