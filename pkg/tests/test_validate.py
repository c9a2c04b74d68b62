import math

import numpy as np
import pytest

from antipt_spdc.enums import Mode, Scheme
from antipt_spdc.gaussian import G4_SPEC, wick_moment
from antipt_spdc.model import ModelParams
from antipt_spdc.observables import pair_spec, r4
from antipt_spdc.propagate import evolve_gaussian
from antipt_spdc.validate import (
    CHECKS,
    COHERENT_R4_BAND,
    CriterionResult,
    ValidationContext,
    ValidationOptions,
    brute_force_moment,
    random_covariance,
    run_all,
)

SMALL = ValidationOptions(cap=2, samples=3, theta_points=9)

# G4 needs four photons, so the engine comparisons run at cap 4
REDUCED = ValidationOptions(
    cap=4, samples=3, theta_points=9, three_mode_cap=2, elimination_scales=(1.0,), gaussian_scales=(3.0, 10.0)
)


@pytest.fixture(scope="module")
def reduced_context():
    return ValidationContext(REDUCED)


@pytest.mark.parametrize("name", ["A9", "A10", "A11", "BD"])
def test_cheap_checks_pass(name):
    result = CHECKS[name](ValidationContext(SMALL))
    assert result.name == name
    assert result.passed, result.detail


@pytest.mark.slow
@pytest.mark.parametrize("name", ["A3", "A4", "A5", "A6", "A7"])
def test_engine_checks_pass_at_reduced_cap(reduced_context, name):
    result = CHECKS[name](reduced_context)
    assert result.name == name
    assert result.passed, result.detail


@pytest.mark.slow
def test_elimination_check_passes_at_reduced_cap(reduced_context, caplog):
    result = CHECKS["A8"](reduced_context)
    assert result.passed, result.detail
    assert result.residual < 0.05
    assert "Gaussian engine only" in caplog.text


def test_coherent_band_covers_the_reference_chip():
    params = ModelParams(scheme=Scheme.COHERENT, theta=0.0, samples=2)
    omega = math.sqrt(params.gamma ** 2 - params.g_eps ** 2)
    expected = (1.0 - math.tan(omega * params.length) ** 2) ** 2
    value = r4(evolve_gaussian(params).final)
    assert value == pytest.approx(expected, rel=1e-3)
    assert COHERENT_R4_BAND[0] <= value < 0.9


def test_flipped_co_generation_is_detected():
    options = ValidationOptions(cap=2, samples=3, theta_points=9, flip_lambda_co=True)
    result = CHECKS["BD"](ValidationContext(options))
    assert not result.passed
    assert result.residual > 1e-3


def test_brute_force_matches_wick():
    rng = np.random.default_rng(7)
    cov = random_covariance(rng)
    for spec in (G4_SPEC, pair_spec(Mode.A_I, Mode.B_S)):
        assert wick_moment(cov, spec) == pytest.approx(brute_force_moment(cov, spec), rel=1e-10)


def test_context_grid_contains_pi():
    context = ValidationContext(SMALL)
    assert len(context.grid) == 9
    assert context.grid[context.pi_index] == pytest.approx(math.pi)
    assert context.params().per_mode_cap == 2


def test_run_all_subset():
    results = run_all(SMALL, only=["A10", "A11"])
    assert [result.name for result in results] == ["A10", "A11"]
    assert all(result.passed for result in results)


def test_run_all_rejects_unknown_checks():
    with pytest.raises(ValueError, match="unknown checks"):
        run_all(SMALL, only=["A99"])


def test_result_serialization():
    result = CriterionResult("A5", True, 0.01, "visibility 0.99")
    assert result.to_dict() == {"name": "A5", "passed": True, "residual": 0.01, "detail": "visibility 0.99"}
    assert "PASS" in repr(result)
