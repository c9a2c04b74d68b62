import math

import numpy as np
import pytest

from antipt_spdc.enums import Mode, Scheme, ThetaCase, TransferFamily
from antipt_spdc.exceptions import BasisError, GaussianStateError, RegimeError, SchemeError
from antipt_spdc.gaussian import (
    ETA,
    G4_SPEC,
    CovarianceState,
    commutator_matrix,
    covariance_from_transfer,
    drift_matrix,
    g4_coherent_pi,
    g4_from_covariance,
    moment_ode,
    n_antipt_pi_det,
    n_antipt_pi_vac,
    n_antipt_theta0_det,
    n_antipt_theta0_vac,
    n_coherent_pi,
    n_coherent_theta0,
    n_vac_from_kernels,
    noise_kernels,
    quadratic_generator,
    transfer_antipt,
    transfer_coherent_pi,
    transfer_coherent_theta0,
    transfer_numeric,
    vacuum_noise_moments,
    wick_moment,
)
from antipt_spdc.model import ModelParams
from antipt_spdc.observables import pair_spec
from antipt_spdc.validate import brute_force_moment, random_covariance

STRONG = ModelParams(g_eps=100.0, gamma=250.0, length=1e-2)


def test_coherent_theta0_needs_gamma_above_g_eps():
    with pytest.raises(RegimeError):
        transfer_coherent_theta0(ModelParams(g_eps=10.0, gamma=5.0), 1e-3)


@pytest.mark.parametrize("builder", [transfer_coherent_theta0, transfer_coherent_pi])
def test_coherent_transfer_is_bogoliubov(builder):
    transfer = builder(STRONG, STRONG.length)
    assert transfer.bogoliubov_defect() < 1e-12


def test_coherent_closed_forms_match_transfer_matrices():
    z = STRONG.length
    cov0 = covariance_from_transfer(transfer_coherent_theta0(STRONG, z))
    assert cov0.mean_photon_number(Mode.A_S) == pytest.approx(n_coherent_theta0(STRONG, z), rel=1e-10)
    cov_pi = covariance_from_transfer(transfer_coherent_pi(STRONG, z))
    assert cov_pi.mean_photon_number(Mode.A_S) == pytest.approx(n_coherent_pi(STRONG, z), rel=1e-10)
    assert g4_from_covariance(cov_pi) == pytest.approx(g4_coherent_pi(STRONG, z), rel=1e-10)


@pytest.mark.parametrize("theta", [0.0, math.pi])
def test_numeric_transfer_matches_coherent_closed_form(theta):
    params = STRONG.replace(scheme=Scheme.COHERENT, theta=theta)
    closed = (transfer_coherent_theta0 if theta == 0.0 else transfer_coherent_pi)(params, params.length)
    numeric = transfer_numeric(params, params.length)
    assert numeric.family is TransferFamily.NUMERIC
    assert np.allclose(numeric.m, closed.m, atol=1e-9)


@pytest.mark.parametrize("theta_case, theta", [(ThetaCase.ZERO, 0.0), (ThetaCase.PI, math.pi)])
def test_antipt_transfer_matches_drift(theta_case, theta):
    params = STRONG.replace(theta=theta)
    transfer, _ = transfer_antipt(params, params.length, theta_case)
    assert np.allclose(transfer.m, transfer_numeric(params, params.length).m, atol=1e-10)


@pytest.mark.parametrize(
    "theta, det, vac",
    [(0.0, n_antipt_theta0_det, n_antipt_theta0_vac), (math.pi, n_antipt_pi_det, n_antipt_pi_vac)],
)
def test_antipt_closed_forms_match_moment_equations(theta, det, vac):
    params = STRONG.replace(theta=theta, samples=4)
    for cov in moment_ode(params)[1:]:
        expected = det(params, cov.z) + vac(params, cov.z)
        assert cov.mean_photon_number(Mode.A_S) == pytest.approx(expected, rel=1e-8)
        assert cov.mean_photon_number(Mode.A_I) == pytest.approx(expected, rel=1e-8)


def test_theta0_vacuum_noise_matches_kernel_quadrature():
    kernels = noise_kernels(STRONG, ThetaCase.ZERO)
    assert kernels.k0(0.0) == 1.0 and kernels.k1(0.0) == 0.0
    z = STRONG.length
    assert n_vac_from_kernels(kernels, STRONG.gamma, z) == pytest.approx(n_antipt_theta0_vac(STRONG, z), rel=1e-9)


def test_antipt_closed_forms_need_dissipation():
    with pytest.raises(RegimeError):
        n_antipt_theta0_vac(ModelParams(gamma=0.0), 1e-3)
    with pytest.raises(RegimeError):
        transfer_antipt(ModelParams(gamma=0.0), 1e-3, ThetaCase.PI)


@pytest.mark.parametrize("theta_case", [ThetaCase.ZERO, ThetaCase.PI])
def test_noise_restores_commutators(theta_case):
    params = ModelParams(theta=0.0 if theta_case is ThetaCase.ZERO else math.pi)
    z = params.length
    transfer, _ = transfer_antipt(params, z, theta_case)
    noise = vacuum_noise_moments(params, z, theta_case)
    assert np.max(np.abs(commutator_matrix(transfer, noise) - ETA)) < 1e-8


def test_lossy_transfer_alone_breaks_commutators():
    params = ModelParams()
    transfer, _ = transfer_antipt(params, params.length, ThetaCase.ZERO)
    assert transfer.bogoliubov_defect() > 1e-3


def test_moment_ode_starts_from_vacuum():
    first = moment_ode(ModelParams(samples=3))[0]
    assert first.z == 0.0
    assert np.all(first.n_block == 0) and np.all(first.m_block == 0)


def test_moment_ode_signal_idler_symmetry():
    for cov in moment_ode(STRONG.replace(theta=1.0, samples=4)):
        signal = cov.mean_photon_number(Mode.A_S) + cov.mean_photon_number(Mode.B_S)
        idler = cov.mean_photon_number(Mode.A_I) + cov.mean_photon_number(Mode.B_I)
        assert signal == pytest.approx(idler, rel=1e-10, abs=1e-15)


def test_moment_ode_rejects_mismatched_initial_state():
    with pytest.raises(BasisError):
        moment_ode(ModelParams(samples=2), initial=CovarianceState.vacuum([Mode.A_S, Mode.A_I]))


def test_three_mode_moment_equations_have_six_modes():
    params = ModelParams(scheme=Scheme.THREE_MODE, kappa=7662.0, gamma_c=81300.0, samples=2)
    final = moment_ode(params)[-1]
    assert len(final.modes) == 6
    assert final.mean_photon_number(Mode.A_S) > 0.0


def test_nhh_scheme_has_no_moment_equations():
    with pytest.raises(SchemeError):
        quadratic_generator(ModelParams(scheme=Scheme.ANTIPT_NHH))


def test_drift_matrix_is_four_by_four():
    assert drift_matrix(ModelParams(theta=0.3)).shape == (4, 4)
    with pytest.raises(SchemeError):
        drift_matrix(ModelParams(scheme=Scheme.THREE_MODE, kappa=1.0, gamma_c=10.0))


def test_wick_matches_pairing_enumeration(rng):
    for _ in range(3):
        cov = random_covariance(rng)
        for spec in (G4_SPEC, pair_spec(Mode.A_S, Mode.B_I)):
            expected = brute_force_moment(cov, spec)
            assert wick_moment(cov, spec) == pytest.approx(expected, rel=1e-10)


def test_wick_of_second_moment_is_the_block_entry(rng):
    cov = random_covariance(rng)
    assert wick_moment(cov, [(Mode.A_S, True), (Mode.B_S, False)]) == pytest.approx(cov.n_block[0, 1])
    assert wick_moment(cov, []) == 1.0


@pytest.mark.parametrize(
    "spec",
    [
        [(Mode.A_S, True)],
        [(Mode.A_S, False), (Mode.A_S, True)],
        [(Mode.A_S, True)] * 5 + [(Mode.A_S, False)] * 5,
    ],
)
def test_wick_rejects_bad_specs(spec):
    with pytest.raises(ValueError):
        wick_moment(CovarianceState.vacuum(), spec)


def test_covariance_state_helpers(rng):
    cov = random_covariance(rng)
    assert cov.hermiticity_error() < 1e-12
    assert cov.symmetry_error() < 1e-12
    marginal = cov.restrict([Mode.B_I, Mode.A_S])
    assert marginal.mean_photon_number(Mode.A_S) == pytest.approx(cov.mean_photon_number(Mode.A_S))
    with pytest.raises(BasisError):
        cov + marginal


def test_covariance_state_rejects_unphysical_blocks(rng):
    cov = random_covariance(rng)
    skewed = np.array(cov.n_block)
    skewed[0, 1] += 1e-3
    with pytest.raises(GaussianStateError, match="Hermitian"):
        CovarianceState(skewed, cov.m_block)
    asymmetric = np.array(cov.m_block)
    asymmetric[0, 2] += 1e-3
    with pytest.raises(GaussianStateError, match="symmetric"):
        CovarianceState(cov.n_block, asymmetric)
    with pytest.raises(GaussianStateError, match="negative eigenvalue"):
        CovarianceState(-np.eye(4), np.zeros((4, 4)))


def test_covariance_state_accepts_roundoff():
    n_block = np.diag([1e-3, 2e-3, 1e-3, 2e-3]).astype(complex)
    n_block[0, 1] = 1e-4 + 1e-4j
    n_block[1, 0] = 1e-4 - 1e-4j + 1e-15
    cov = CovarianceState(n_block, np.zeros((4, 4)))
    assert cov.hermiticity_error() == pytest.approx(1e-15, abs=1e-16)
