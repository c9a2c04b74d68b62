import logging
import math

import numpy as np
import pytest

from antipt_spdc.enums import THREE_MODE_MODES, Direction, Mode, Scheme, Supermode
from antipt_spdc.exceptions import BasisError
from antipt_spdc.fock import DensityMatrix, bd_transform, build_basis, supermode_state
from antipt_spdc.model import (
    REFERENCE_G_EPS,
    REFERENCE_GAMMA,
    ModelParams,
    NonlinearCoeffs,
    build_h_linear_eff,
    build_h_nl,
    build_h_nl_bd,
    build_system,
    build_three_mode_model,
    jump_term,
    lindblad_rhs,
    nonlinear_coeffs,
)


def test_params_defaults_are_reference_point():
    params = ModelParams()
    assert params.g_eps == REFERENCE_G_EPS
    assert params.gamma == REFERENCE_GAMMA
    assert params.z_grid[0] == 0.0
    assert params.z_grid[-1] == pytest.approx(4e-3)
    assert len(params.z_grid) == params.samples


def test_params_wraps_theta():
    assert ModelParams(theta=-math.pi / 2).theta == pytest.approx(1.5 * math.pi)
    assert ModelParams(theta=2 * math.pi).theta == 0.0


@pytest.mark.parametrize(
    "changes",
    [
        {"g_eps": -1.0},
        {"gamma": -1.0},
        {"scheme": Scheme.THREE_MODE},
        {"scheme": Scheme.THREE_MODE, "kappa": 1.0, "gamma_c": 0.0},
        {"step": 0.0},
        {"samples": 1},
        {"z_points": (1e-4, 2e-4)},
        {"z_points": (0.0, 2e-4, 1e-4)},
    ],
)
def test_params_validation(changes):
    with pytest.raises(ValueError):
        ModelParams(**changes)


def test_explicit_z_points():
    params = ModelParams(z_points=(0.0, 1e-4, 3e-4))
    assert list(params.z_grid) == [0.0, 1e-4, 3e-4]


def test_effective_gamma_of_three_mode():
    params = ModelParams(scheme=Scheme.THREE_MODE, kappa=7662.0, gamma_c=81300.0)
    assert params.effective_gamma == pytest.approx(7662.0 ** 2 / 81300.0)
    assert params.modes == THREE_MODE_MODES


def test_nonlinear_coeffs_at_special_phases():
    at_zero = nonlinear_coeffs(2.0, 0.0)
    assert at_zero.lambda_co == pytest.approx(2.0)
    assert at_zero.lambda_x == pytest.approx(0.0)
    at_pi = nonlinear_coeffs(2.0, math.pi)
    assert abs(at_pi.lambda_co) < 1e-15
    assert at_pi.lambda_x == pytest.approx(-2.0)


def test_h_nl_is_hermitian(small_basis):
    h = build_h_nl(ModelParams(theta=0.7), small_basis)
    assert abs(h - h.conj().T).max() < 1e-15


def test_h_nl_needs_waveguide_modes():
    with pytest.raises(BasisError):
        build_h_nl(ModelParams(), build_basis([Mode.A_S, Mode.A_I], 2))


def test_effective_hamiltonian_of_antipt(small_basis):
    params = ModelParams(theta=1.3)
    model = build_system(params, small_basis)
    expected = build_h_nl(params, small_basis) + build_h_linear_eff(params, small_basis)
    assert abs(model.h_eff - expected).max() < 1e-9
    assert len(model.collapse_ops) == 2


def test_coherent_model_is_closed(small_basis):
    model = build_system(ModelParams(scheme=Scheme.COHERENT, theta=0.4), small_basis)
    assert model.collapse_ops == ()
    assert abs(model.hamiltonian - model.hamiltonian.conj().T).max() < 1e-12


def test_lindblad_rhs_preserves_trace_and_hermiticity(small_basis, random_density):
    rho = random_density(small_basis)
    rhs = lindblad_rhs(ModelParams(theta=2.1), rho)
    assert abs(np.trace(rhs)) < 1e-9
    assert np.max(np.abs(rhs - rhs.conj().T)) < 1e-9


def test_jump_term_vanishes_on_dark_states(small_basis):
    psi = supermode_state(small_basis, {(Supermode.DARK, "s"): 1, (Supermode.DARK, "i"): 1})
    recycled = jump_term(ModelParams(), DensityMatrix.from_state(psi))
    assert np.max(np.abs(recycled)) < 1e-9


def test_system_rejects_mismatched_state(small_basis):
    model = build_system(ModelParams(), small_basis)
    with pytest.raises(BasisError):
        model.check(np.zeros((3, 3)), 2)


def test_bright_dark_form_matches_waveguide_form(small_basis):
    params = ModelParams(theta=1.1)
    mapped = bd_transform(build_h_nl_bd(params, small_basis), Direction.TO_WAVEGUIDE, small_basis)
    assert abs(mapped - build_h_nl(params, small_basis)).max() / params.g_eps < 1e-12


def test_bright_dark_form_detects_flipped_coefficient(small_basis):
    params = ModelParams(theta=1.1)
    coeffs = nonlinear_coeffs(params.g_eps, params.theta)
    flipped = NonlinearCoeffs(-coeffs.lambda_co, coeffs.lambda_x)
    mapped = bd_transform(build_h_nl_bd(params, small_basis, flipped), Direction.TO_WAVEGUIDE, small_basis)
    assert abs(mapped - build_h_nl(params, small_basis)).max() / params.g_eps > 0.1


def test_three_mode_model(caplog):
    basis = build_basis(THREE_MODE_MODES, 1, 2)
    params = ModelParams(scheme=Scheme.THREE_MODE, kappa=100.0, gamma_c=200.0)
    with caplog.at_level(logging.WARNING, logger="antipt_spdc.model"):
        model = build_three_mode_model(params, basis)
    assert "gamma_c/kappa" in caplog.text
    assert len(model.collapse_ops) == 2
    assert model.scheme is Scheme.THREE_MODE
    assert abs(model.hamiltonian - model.hamiltonian.conj().T).max() < 1e-12


def test_three_mode_model_needs_lossy_waveguide(small_basis):
    params = ModelParams(scheme=Scheme.THREE_MODE, kappa=100.0, gamma_c=2000.0)
    with pytest.raises(BasisError):
        build_three_mode_model(params, small_basis)
