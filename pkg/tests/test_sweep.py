import math

import numpy as np
import pytest

from antipt_spdc.enums import Engine, Scheme
from antipt_spdc.exceptions import SweepPointError
from antipt_spdc.model import ModelParams
from antipt_spdc.observables import visibility
from antipt_spdc.sweep import (
    DEFAULT_SWEEP_POINTS,
    default_theta_grid,
    engine_params,
    iter_sweep,
    run_engine,
    sweep_phase,
)

TEMPLATE = ModelParams(per_mode_cap=2, total_cap=2, samples=2)


def test_default_grid_contains_special_phases():
    grid = default_theta_grid()
    assert len(grid) == DEFAULT_SWEEP_POINTS
    assert grid[0] == 0.0 and grid[-1] == pytest.approx(2 * math.pi)
    assert grid[8] == pytest.approx(math.pi / 2)
    assert grid[16] == pytest.approx(math.pi)
    assert list(default_theta_grid(1)) == [0.0]
    with pytest.raises(ValueError):
        default_theta_grid(0)


@pytest.mark.parametrize(
    "scheme, engine, expected",
    [
        (Scheme.ANTIPT_MASTER, Engine.NHH, Scheme.ANTIPT_NHH),
        (Scheme.ANTIPT_NHH, Engine.ME, Scheme.ANTIPT_MASTER),
        (Scheme.ANTIPT_NHH, Engine.GAUSSIAN, Scheme.ANTIPT_MASTER),
        (Scheme.ANTIPT_MASTER, Engine.COHERENT, Scheme.COHERENT),
        (Scheme.COHERENT, Engine.ME, Scheme.COHERENT),
    ],
)
def test_engine_params(scheme, engine, expected):
    assert engine_params(TEMPLATE.replace(scheme=scheme), engine).scheme is expected


def test_run_engine_dispatch():
    assert run_engine(TEMPLATE, Engine.NHH).scheme is Scheme.ANTIPT_NHH
    assert run_engine(TEMPLATE, Engine.COHERENT).scheme is Scheme.COHERENT
    assert run_engine(TEMPLATE, Engine.GAUSSIAN).scheme is Scheme.ANTIPT_MASTER


def test_sweep_is_sorted_and_keeps_raw_theta():
    records = sweep_phase(TEMPLATE, [2 * math.pi, math.pi, 0.0], Engine.GAUSSIAN)
    assert [record.theta for record in records] == [0.0, math.pi, 2 * math.pi]
    assert records[0].corr4 == pytest.approx(records[-1].corr4, rel=1e-10)


def test_gaussian_sweep_has_minimum_at_pi():
    grid = default_theta_grid(9)
    curve = [record.corr4 for record in sweep_phase(TEMPLATE, grid, Engine.GAUSSIAN)]
    assert int(np.argmin(curve)) == 4
    assert visibility(curve) > 0.9


def test_sweep_rejects_bad_arguments():
    with pytest.raises(ValueError):
        list(iter_sweep(TEMPLATE, [], Engine.GAUSSIAN))
    with pytest.raises(ValueError):
        list(iter_sweep(TEMPLATE, [0.0], Engine.GAUSSIAN, workers=0))


def test_failed_points_are_flagged():
    template = ModelParams(scheme=Scheme.THREE_MODE, kappa=7662.0, gamma_c=81300.0, samples=2)
    points = list(iter_sweep(template, [0.0, 1.0], Engine.NHH))
    assert [point.ok for point in points] == [False, False]
    assert "three-mode" in points[0].error
    with pytest.raises(SweepPointError) as info:
        sweep_phase(template, [1.0, 0.5], Engine.NHH)
    assert info.value.theta == 0.5


def test_sweep_in_worker_processes():
    grid = [0.0, math.pi / 2, math.pi]
    inline = sweep_phase(TEMPLATE, grid, Engine.GAUSSIAN)
    pooled = sweep_phase(TEMPLATE, grid, Engine.GAUSSIAN, workers=2)
    assert [r.corr4 for r in pooled] == pytest.approx([r.corr4 for r in inline], rel=1e-12)
