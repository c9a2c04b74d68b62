import numpy as np
import pytest
from scipy import sparse

from antipt_spdc.enums import WAVEGUIDE_MODES, Direction, LadderKind, Mode, Supermode
from antipt_spdc.exceptions import BasisError
from antipt_spdc.fock import (
    DensityMatrix,
    StateVector,
    bd_transform,
    beamsplitter_unitary,
    build_basis,
    dagger,
    ladder,
    supermode,
    supermode_state,
)


def test_basis_dimensions():
    assert build_basis(WAVEGUIDE_MODES, 2, 2).dim == 15
    assert build_basis(WAVEGUIDE_MODES, 1).dim == 16
    assert build_basis([Mode.A_S], 3).dim == 4


def test_basis_index_round_trip(small_basis):
    for i, occupation in enumerate(small_basis.states):
        assert small_basis.index(occupation) == i
        assert small_basis.occupation(i) == occupation


def test_basis_rejects_outside_occupation(small_basis):
    with pytest.raises(BasisError):
        small_basis.index((2, 1, 0, 0))


def test_basis_rejects_duplicate_modes():
    with pytest.raises(BasisError):
        build_basis([Mode.A_S, Mode.A_S], 1)


def test_edge_indices_touch_a_cap(small_basis):
    for i in small_basis.edge_indices:
        assert sum(small_basis.states[i]) == 2 or max(small_basis.states[i]) == 2
    assert small_basis.index((0, 0, 0, 0)) not in set(small_basis.edge_indices)


def test_number_operator_matches_ladder_product(small_basis):
    for mode in WAVEGUIDE_MODES:
        a = ladder(small_basis, mode, LadderKind.ANNIHILATE)
        number = ladder(small_basis, mode, LadderKind.NUMBER)
        assert abs(dagger(a) @ a - number).max() < 1e-15


def test_canonical_commutator_below_cap(small_basis):
    a = ladder(small_basis, Mode.B_I, LadderKind.ANNIHILATE)
    commutator = (a @ dagger(a) - dagger(a) @ a).toarray()
    below = [i for i, occupation in enumerate(small_basis.states) if sum(occupation) < 2]
    assert np.allclose(commutator[np.ix_(below, below)], np.eye(len(below)))


def test_ladder_rejects_missing_mode(small_basis):
    with pytest.raises(BasisError):
        ladder(small_basis, Mode.C_S, LadderKind.CREATE)


def test_ladder_is_canonical_csr(small_basis):
    op = ladder(small_basis, Mode.A_S, LadderKind.CREATE)
    assert sparse.isspmatrix_csr(op)
    assert op.has_sorted_indices


def test_state_vector_validation(small_basis):
    with pytest.raises(BasisError):
        StateVector(small_basis, np.zeros(3))
    psi = StateVector.from_occupation(small_basis, {Mode.A_S: 1, Mode.A_I: 1})
    assert psi.norm() == pytest.approx(1.0)
    assert not psi.amplitudes.flags.writeable
    assert psi.expect(ladder(small_basis, Mode.A_S, LadderKind.NUMBER)).real == pytest.approx(1.0)


def test_density_matrix_from_state(small_basis):
    rho = DensityMatrix.from_state(StateVector.from_occupation(small_basis, (0, 1, 1, 0)))
    assert rho.trace() == pytest.approx(1.0)
    assert rho.hermiticity_error() == 0.0
    assert rho.min_eigenvalue() == pytest.approx(0.0, abs=1e-12)
    assert rho.expect(ladder(small_basis, Mode.B_S, LadderKind.NUMBER)).real == pytest.approx(1.0)


def test_beamsplitter_unitary_is_unitary(small_basis):
    u = beamsplitter_unitary(small_basis)
    assert np.allclose(u @ u.conj().T, np.eye(small_basis.dim), atol=1e-13)


def test_beamsplitter_needs_closed_truncation():
    with pytest.raises(BasisError, match="total_cap <= per_mode_cap"):
        beamsplitter_unitary(build_basis(WAVEGUIDE_MODES, 1, 2))


def test_beamsplitter_needs_both_arms():
    with pytest.raises(BasisError):
        beamsplitter_unitary(build_basis([Mode.A_S, Mode.A_I], 2, 2))


def test_bd_transform_round_trip(small_basis, random_density):
    rho = random_density(small_basis)
    back = bd_transform(bd_transform(rho, Direction.TO_BD), Direction.TO_WAVEGUIDE)
    assert np.allclose(back.matrix, rho.matrix, atol=1e-13)


def test_bd_transform_maps_ladder_to_supermode(small_basis):
    # the slot of a_s holds B_s in the bright/dark representation
    a_s = ladder(small_basis, Mode.A_S, LadderKind.ANNIHILATE)
    mapped = bd_transform(a_s, Direction.TO_WAVEGUIDE, small_basis)
    bright = supermode(small_basis, Supermode.BRIGHT, "s")
    assert abs(mapped - bright).max() < 1e-13


def test_bd_transform_operator_needs_basis(small_basis):
    with pytest.raises(BasisError):
        bd_transform(ladder(small_basis, Mode.A_S, LadderKind.ANNIHILATE), Direction.TO_BD)


def test_supermode_state_populations(small_basis):
    psi = supermode_state(small_basis, {(Supermode.BRIGHT, "s"): 1, (Supermode.DARK, "i"): 1})
    assert psi.norm() == pytest.approx(1.0)
    for key, expected in (
        ((Supermode.BRIGHT, "s"), 1.0),
        ((Supermode.DARK, "i"), 1.0),
        ((Supermode.DARK, "s"), 0.0),
        ((Supermode.BRIGHT, "i"), 0.0),
    ):
        op = supermode(small_basis, *key)
        assert psi.expect(dagger(op) @ op).real == pytest.approx(expected, abs=1e-13)
    for mode in WAVEGUIDE_MODES:
        assert psi.expect(ladder(small_basis, mode, LadderKind.NUMBER)).real == pytest.approx(0.5)


def test_supermode_state_must_fit_truncation():
    basis = build_basis(WAVEGUIDE_MODES, 1, 1)
    with pytest.raises(BasisError):
        supermode_state(basis, {(Supermode.BRIGHT, "s"): 2})
