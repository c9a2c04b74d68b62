"""
Pump-phase sweeps.

Every grid point is an independent run of one engine; points may be spread
over a process pool and are always returned sorted by theta.
"""

import logging
import math
from dataclasses import dataclass, replace
from multiprocessing import Pool
from typing import Iterator, List, Optional, Sequence

import numpy as np

from antipt_spdc.enums import Engine, Scheme
from antipt_spdc.exceptions import AntiPTError, SweepPointError
from antipt_spdc.model import ModelParams
from antipt_spdc.observables import CorrelationRecord
from antipt_spdc.propagate import Trajectory, evolve_gaussian, evolve_master, evolve_nhh

logger = logging.getLogger(__name__)

DEFAULT_SWEEP_POINTS = 33


@dataclass(frozen=True)
class SweepPoint:
    """
    Outcome of one sweep point.

    Attributes:
        theta (float): Grid value of the pump phase, unwrapped.
        record (Optional[CorrelationRecord]): Endpoint observables, None on failure.
        error (Optional[str]): Failure message, None on success.
    """
    theta: float
    record: Optional[CorrelationRecord] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def __repr__(self):
        status = "ok" if self.ok else f"error={self.error!r}"
        return f"<SweepPoint theta={self.theta:.6g} {status}>"


def default_theta_grid(points: int = DEFAULT_SWEEP_POINTS) -> np.ndarray:
    """Uniform grid over [0, 2 pi]; 33 points contain 0, pi/2 and pi."""
    if points < 1:
        raise ValueError("a theta grid needs at least one point")
    if points == 1:
        return np.zeros(1)
    return np.linspace(0.0, 2.0 * math.pi, points)


def engine_params(params: ModelParams, engine: Engine) -> ModelParams:
    """Maps a parameter template onto the scheme an engine runs."""
    if engine is Engine.COHERENT:
        return params.replace(scheme=Scheme.COHERENT)
    if engine is Engine.NHH:
        if params.scheme is Scheme.ANTIPT_MASTER:
            return params.replace(scheme=Scheme.ANTIPT_NHH)
        return params
    if params.scheme is Scheme.ANTIPT_NHH:
        return params.replace(scheme=Scheme.ANTIPT_MASTER)
    return params


def run_engine(
    params: ModelParams,
    engine: Engine,
    *,
    include_jumps: bool = True,
    normalize_nhh: bool = False,
    keep_states: bool = False,
) -> Trajectory:
    """
    Runs one engine on params.

    Args:
        params (ModelParams): Parameter template; its scheme is mapped by engine_params.
        engine (Engine): ME, NHH, GAUSSIAN or COHERENT.
        include_jumps (bool): Forwarded to evolve_master.
        normalize_nhh (bool): Forwarded to evolve_nhh.
        keep_states (bool): Keep full states in the trajectory.

    Returns:
        Trajectory: The run.
    """
    params = engine_params(params, engine)
    if engine is Engine.NHH:
        return evolve_nhh(params, normalize=normalize_nhh, keep_states=keep_states)
    if engine is Engine.GAUSSIAN:
        return evolve_gaussian(params, keep_states=keep_states)
    return evolve_master(params, include_jumps=include_jumps, keep_states=keep_states)


def _sweep_task(task) -> SweepPoint:
    template, theta, engine, include_jumps, normalize_nhh = task
    try:
        trajectory = run_engine(
            template.replace(theta=theta), engine, include_jumps=include_jumps, normalize_nhh=normalize_nhh
        )
    except AntiPTError as e:
        logger.warning("sweep point theta=%.6g failed: %s", theta, e)
        return SweepPoint(theta, error=str(e))
    return SweepPoint(theta, record=replace(trajectory.final, theta=float(theta)))


def iter_sweep(
    template: ModelParams,
    theta_grid: Sequence[float],
    engine: Engine,
    *,
    workers: int = 1,
    include_jumps: bool = True,
    normalize_nhh: bool = False,
) -> Iterator[SweepPoint]:
    """
    Evaluates the endpoint record of every theta, sorted by theta.

    Failed points are yielded with an error message instead of a record.

    Args:
        template (ModelParams): Parameters; theta is overridden per point.
        theta_grid (Sequence[float]): Pump phases (rad).
        engine (Engine): Engine to run.
        workers (int): Worker processes; 1 runs inline.
        include_jumps (bool): Forwarded to evolve_master.
        normalize_nhh (bool): Forwarded to evolve_nhh.

    Yields:
        SweepPoint: One per grid value.
    """
    grid = sorted(float(theta) for theta in theta_grid)
    if not grid:
        raise ValueError("theta grid is empty")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    tasks = [(template, theta, engine, include_jumps, normalize_nhh) for theta in grid]
    logger.info("sweep: engine=%s points=%d workers=%d", engine.value, len(grid), workers)
    if workers == 1 or len(tasks) == 1:
        for i, task in enumerate(tasks, 1):
            logger.info("sweep point %d/%d theta=%.6g", i, len(tasks), task[1])
            yield _sweep_task(task)
        return
    with Pool(processes=min(workers, len(tasks))) as pool:
        for point in pool.imap(_sweep_task, tasks):
            logger.info("sweep point theta=%.6g done", point.theta)
            yield point


def sweep_phase(
    template: ModelParams,
    theta_grid: Sequence[float],
    engine: Engine,
    *,
    workers: int = 1,
    include_jumps: bool = True,
    normalize_nhh: bool = False,
) -> List[CorrelationRecord]:
    """
    One CorrelationRecord per theta, sorted by theta.

    Raises:
        ValueError: If the grid is empty.
        SweepPointError: If any point fails; carries the offending theta.
    """
    records = []
    for point in iter_sweep(
        template, theta_grid, engine, workers=workers, include_jumps=include_jumps, normalize_nhh=normalize_nhh
    ):
        if not point.ok:
            raise SweepPointError(point.theta, AntiPTError(point.error))
        records.append(point.record)
    return records
