"""
Truncated multimode Fock space.

This module defines the occupation-number basis, sparse ladder operators,
pure and mixed states on a basis, and the bright/dark basis change generated
by the 50:50 beamsplitter relation B = (a + b)/sqrt(2), D = (a - b)/sqrt(2).

The bright/dark representation reuses the waveguide basis slots: the slot of
a_mu holds B_mu and the slot of b_mu holds D_mu.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Dict, Iterable, Mapping, Optional, Tuple, Union

import numpy as np
from scipy import sparse

from antipt_spdc.enums import FREQUENCIES, Direction, LadderKind, Mode, Supermode
from antipt_spdc.exceptions import BasisError

logger = logging.getLogger(__name__)

Occupation = Tuple[int, ...]
Operator = Union[sparse.csr_matrix, np.ndarray]

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class FockBasis:
    """
    Truncated occupation-number basis.

    States are every tuple (n_1, ..., n_k) with n_j <= per_mode_cap and, when
    total_cap is set, sum(n_j) <= total_cap, in lexicographic order of the
    declared mode order.

    Attributes:
        modes (Tuple[Mode, ...]): Ordered mode labels.
        per_mode_cap (int): Maximum occupation of a single mode.
        total_cap (Optional[int]): Maximum total photon number.
        states (Tuple[Occupation, ...]): Enumerated occupation tuples.
    """
    modes: Tuple[Mode, ...]
    per_mode_cap: int
    total_cap: Optional[int] = None
    states: Tuple[Occupation, ...] = field(init=False, repr=False, compare=False)
    _index: Dict[Occupation, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        modes = tuple(self.modes)
        if not modes:
            raise BasisError("mode list must not be empty")
        if len(set(modes)) != len(modes):
            raise BasisError("mode list contains duplicates")
        if self.per_mode_cap < 0:
            raise ValueError("per_mode_cap must be >= 0")
        if self.total_cap is not None and self.total_cap < 0:
            raise ValueError("total_cap must be >= 0")
        states = tuple(
            occupation
            for occupation in itertools.product(range(self.per_mode_cap + 1), repeat=len(modes))
            if self.total_cap is None or sum(occupation) <= self.total_cap
        )
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "_index", {occupation: i for i, occupation in enumerate(states)})

    @property
    def dim(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return len(self.states)

    def index(self, occupation: Occupation) -> int:
        """Returns the basis index of an occupation tuple."""
        try:
            return self._index[tuple(occupation)]
        except KeyError:
            raise BasisError(f"occupation {tuple(occupation)} is outside the truncated basis") from None

    def occupation(self, index: int) -> Occupation:
        """Returns the occupation tuple at a basis index."""
        return self.states[index]

    def position(self, mode: Mode) -> int:
        """Returns the slot of a mode in the occupation tuples."""
        try:
            return self.modes.index(mode)
        except ValueError:
            raise BasisError(f"mode {getattr(mode, 'value', mode)} is not in the basis") from None

    def require(self, modes: Iterable[Mode]) -> None:
        """Raises BasisError unless every mode is present."""
        missing = [mode.value for mode in modes if mode not in self.modes]
        if missing:
            raise BasisError(f"basis lacks modes: {', '.join(missing)}")

    def occupation_of(self, occupations: Mapping[Mode, int]) -> Occupation:
        """Builds an occupation tuple from a sparse mode -> count mapping."""
        occupation = [0] * len(self.modes)
        for mode, count in occupations.items():
            occupation[self.position(mode)] = int(count)
        return tuple(occupation)

    @cached_property
    def edge_indices(self) -> np.ndarray:
        """Indices of states that touch a truncation cap."""
        return np.array(
            [
                i
                for i, occupation in enumerate(self.states)
                if (self.total_cap is not None and sum(occupation) == self.total_cap)
                or max(occupation) == self.per_mode_cap
            ],
            dtype=int,
        )

    def __repr__(self):
        modes = ",".join(mode.value for mode in self.modes)
        return f"<FockBasis modes={modes} per_mode_cap={self.per_mode_cap} total_cap={self.total_cap} dim={self.dim}>"


def build_basis(modes: Iterable[Mode], per_mode_cap: int, total_cap: Optional[int] = None) -> FockBasis:
    """
    Enumerates a truncated Fock basis.

    Args:
        modes (Iterable[Mode]): Mode labels in slot order.
        per_mode_cap (int): Maximum occupation per mode.
        total_cap (int, optional): Maximum total photon number.

    Returns:
        FockBasis: The enumerated basis.

    Raises:
        BasisError: If the mode list is empty or has duplicates.
    """
    return _cached_basis(tuple(modes), per_mode_cap, total_cap)


@lru_cache(maxsize=None)
def _cached_basis(modes: Tuple[Mode, ...], per_mode_cap: int, total_cap: Optional[int]) -> FockBasis:
    return FockBasis(modes, per_mode_cap, total_cap)


@lru_cache(maxsize=None)
def _annihilator(basis: FockBasis, mode: Mode) -> sparse.csr_matrix:
    slot = basis.position(mode)
    rows, cols, values = [], [], []
    for col, occupation in enumerate(basis.states):
        n = occupation[slot]
        if n == 0:
            continue
        lowered = occupation[:slot] + (n - 1,) + occupation[slot + 1:]
        rows.append(basis.index(lowered))
        cols.append(col)
        values.append(math.sqrt(n))
    op = sparse.csr_matrix(
        (np.asarray(values, dtype=complex), (rows, cols)), shape=(basis.dim, basis.dim)
    )
    op.sort_indices()
    return op


def ladder(basis: FockBasis, mode: Mode, kind: LadderKind) -> sparse.csr_matrix:
    """
    Builds a single-mode ladder operator on a truncated basis.

    Args:
        basis (FockBasis): Basis the operator acts on.
        mode (Mode): Mode label.
        kind (LadderKind): Annihilation, creation or number operator.

    Returns:
        sparse.csr_matrix: Operator in canonical CSR format.

    Raises:
        BasisError: If the mode is not part of the basis.
    """
    annihilate = _annihilator(basis, mode)
    if kind is LadderKind.ANNIHILATE:
        return annihilate.copy()
    if kind is LadderKind.CREATE:
        return dagger(annihilate)
    slot = basis.position(mode)
    diagonal = np.array([occupation[slot] for occupation in basis.states], dtype=complex)
    return sparse.diags(diagonal, format="csr")


def dagger(op: sparse.spmatrix) -> sparse.csr_matrix:
    """Conjugate transpose of a sparse operator, returned in canonical CSR format."""
    result = op.conj().T.tocsr()
    result.sort_indices()
    return result


def supermode(basis: FockBasis, kind: Supermode, frequency: str) -> sparse.csr_matrix:
    """Returns the bright or dark annihilation operator of a frequency in the waveguide basis."""
    a = ladder(basis, Mode.of("a", frequency), LadderKind.ANNIHILATE)
    b = ladder(basis, Mode.of("b", frequency), LadderKind.ANNIHILATE)
    combined = (a + b) if kind is Supermode.BRIGHT else (a - b)
    return (combined / SQRT2).tocsr()


def trace_product(op: Operator, rho: np.ndarray) -> complex:
    """Computes tr(op @ rho) without forming the product."""
    if sparse.issparse(op):
        return complex(op.multiply(rho.T).sum())
    return complex(np.sum(np.asarray(op) * rho.T))


@dataclass(frozen=True, eq=False)
class StateVector:
    """
    Pure state on a truncated Fock basis.

    Attributes:
        basis (FockBasis): Basis the amplitudes refer to.
        amplitudes (np.ndarray): Read-only complex amplitude vector.
    """
    basis: FockBasis
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amplitudes = np.array(self.amplitudes, dtype=complex)
        if amplitudes.shape != (self.basis.dim,):
            raise BasisError(f"state shape {amplitudes.shape} does not match basis dimension {self.basis.dim}")
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def vacuum(cls, basis: FockBasis) -> "StateVector":
        return cls.from_occupation(basis, {})

    @classmethod
    def from_occupation(cls, basis: FockBasis, occupations: Union[Mapping[Mode, int], Occupation]) -> "StateVector":
        """Builds a number state from a mode -> count mapping or a full occupation tuple."""
        if isinstance(occupations, Mapping):
            occupation = basis.occupation_of(occupations)
        else:
            occupation = tuple(occupations)
        amplitudes = np.zeros(basis.dim, dtype=complex)
        amplitudes[basis.index(occupation)] = 1.0
        return cls(basis, amplitudes)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def expect(self, op: Operator) -> complex:
        """Returns <psi|op|psi> without normalizing the state."""
        return complex(np.vdot(self.amplitudes, op @ self.amplitudes))

    def __repr__(self):
        return f"<StateVector dim={self.basis.dim} norm={self.norm():.6g}>"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    Mixed state on a truncated Fock basis.

    Attributes:
        basis (FockBasis): Basis the matrix refers to.
        matrix (np.ndarray): Read-only complex square matrix.
    """
    basis: FockBasis
    matrix: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.shape != (self.basis.dim, self.basis.dim):
            raise BasisError(f"matrix shape {matrix.shape} does not match basis dimension {self.basis.dim}")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_state(cls, state: StateVector) -> "DensityMatrix":
        return cls(state.basis, np.outer(state.amplitudes, state.amplitudes.conj()))

    @classmethod
    def vacuum(cls, basis: FockBasis) -> "DensityMatrix":
        return cls.from_state(StateVector.vacuum(basis))

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))[0])

    def expect(self, op: Operator) -> complex:
        return trace_product(op, self.matrix)

    def __repr__(self):
        return f"<DensityMatrix dim={self.basis.dim} trace={self.trace().real:.6g}>"


def _check_pairs(basis: FockBasis) -> None:
    for frequency in FREQUENCIES:
        pair = (Mode.of("a", frequency), Mode.of("b", frequency))
        if not all(mode in basis.modes for mode in pair):
            raise BasisError(f"basis lacks the a/b pair for frequency {frequency}")


@lru_cache(maxsize=None)
def beamsplitter_unitary(basis: FockBasis) -> np.ndarray:
    """
    Unitary taking waveguide-basis amplitudes to bright/dark-basis amplitudes.

    Column j holds basis state j expanded in bright/dark occupations. The
    truncation must be closed under the beamsplitter, which holds when
    total_cap <= per_mode_cap.

    Raises:
        BasisError: If a mode pair is missing or the truncation is not closed.
    """
    _check_pairs(basis)
    closed = basis.per_mode_cap == 0 or (basis.total_cap is not None and basis.total_cap <= basis.per_mode_cap)
    if not closed:
        raise BasisError(
            "bright/dark basis change needs total_cap <= per_mode_cap "
            f"(got per_mode_cap={basis.per_mode_cap}, total_cap={basis.total_cap})"
        )
    creators = {mode: ladder(basis, mode, LadderKind.CREATE) for mode in basis.modes}
    images = dict(creators)
    for frequency in FREQUENCIES:
        a, b = Mode.of("a", frequency), Mode.of("b", frequency)
        images[a] = ((creators[a] + creators[b]) / SQRT2).tocsr()
        images[b] = ((creators[a] - creators[b]) / SQRT2).tocsr()

    vacuum = basis.index((0,) * len(basis.modes))
    unitary = np.zeros((basis.dim, basis.dim), dtype=complex)
    for col, occupation in enumerate(basis.states):
        vec = np.zeros(basis.dim, dtype=complex)
        vec[vacuum] = 1.0
        norm = 1.0
        for mode, n in zip(basis.modes, occupation):
            for _ in range(n):
                vec = images[mode] @ vec
            norm *= math.factorial(n)
        unitary[:, col] = vec / math.sqrt(norm)
    unitary.setflags(write=False)
    return unitary


def _clean(matrix: np.ndarray) -> sparse.csr_matrix:
    matrix = np.where(np.abs(matrix) < 1e-15, 0.0, matrix)
    op = sparse.csr_matrix(matrix)
    op.sort_indices()
    return op


def bd_transform(obj, direction: Direction, basis: Optional[FockBasis] = None):
    """
    Changes between the waveguide (a, b) and bright/dark (B, D) representations.

    States transform as U psi and operators or density matrices as U O U^dagger,
    where U is beamsplitter_unitary(basis); to_waveguide applies the inverse.

    Args:
        obj: StateVector, DensityMatrix, sparse operator or dense operator.
        direction (Direction): TO_BD or TO_WAVEGUIDE.
        basis (FockBasis, optional): Required when obj is a bare operator.

    Returns:
        Same kind as obj.

    Raises:
        BasisError: If the basis lacks a paired mode or no basis is given for an operator.
    """
    if isinstance(obj, (StateVector, DensityMatrix)):
        basis = obj.basis
    if basis is None:
        raise BasisError("bd_transform of a bare operator needs its basis")
    unitary = beamsplitter_unitary(basis)
    if direction is Direction.TO_WAVEGUIDE:
        unitary = unitary.conj().T
    if isinstance(obj, StateVector):
        return StateVector(basis, unitary @ obj.amplitudes)
    if isinstance(obj, DensityMatrix):
        return DensityMatrix(basis, unitary @ obj.matrix @ unitary.conj().T)
    if sparse.issparse(obj):
        return _clean(unitary @ (obj @ unitary.conj().T))
    return unitary @ np.asarray(obj) @ unitary.conj().T


def supermode_state(basis: FockBasis, occupations: Mapping[Tuple[Supermode, str], int]) -> StateVector:
    """
    Builds a waveguide-basis number state of bright/dark supermodes.

    Args:
        basis (FockBasis): Waveguide basis.
        occupations (Mapping): (Supermode, frequency) -> photon count,
            e.g. {(Supermode.BRIGHT, "s"): 1, (Supermode.DARK, "i"): 1}.

    Returns:
        StateVector: Normalized state.

    Raises:
        BasisError: If the state does not fit the truncation.
    """
    vec = StateVector.vacuum(basis).amplitudes.copy()
    norm = 1.0
    for (kind, frequency), n in occupations.items():
        creator = dagger(supermode(basis, kind, frequency))
        for _ in range(n):
            vec = creator @ vec
        norm *= math.factorial(n)
    vec = vec / math.sqrt(norm)
    if abs(np.linalg.norm(vec) - 1.0) > 1e-12:
        raise BasisError("supermode state does not fit the truncation")
    return StateVector(basis, vec)
