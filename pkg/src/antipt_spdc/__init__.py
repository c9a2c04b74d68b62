# flake8: noqa: F401
"""
antipt_spdc: quantum simulation of spontaneous parametric down-conversion in
dissipatively coupled (anti-PT-symmetric) waveguide pairs.
"""

__title__ = "antipt_spdc"
__author__ = "antipt_spdc developers"
__license__ = "MIT License"

from antipt_spdc.version import __version__
from antipt_spdc.enums import Mode, Supermode, Scheme, Engine, Direction, LadderKind, ThetaCase
from antipt_spdc.exceptions import (
    AntiPTError,
    BasisError,
    RegimeError,
    SchemeError,
    IntegrationError,
    GaussianStateError,
    UndefinedObservableError,
    DesignError,
    PhaseMatchingError,
    FitDegeneracyError,
    ConfigError,
    SweepPointError,
)
from antipt_spdc.fock import FockBasis, StateVector, DensityMatrix, build_basis, bd_transform
from antipt_spdc.model import ModelParams, SystemModel, build_system
from antipt_spdc.gaussian import CovarianceState, TransferMatrix, moment_ode
from antipt_spdc.observables import CorrelationRecord, CorrelationExtractor, visibility
from antipt_spdc.propagate import Trajectory, evolve_master, evolve_nhh, evolve_gaussian, evolve_classical
from antipt_spdc.sweep import sweep_phase, iter_sweep
from antipt_spdc.design import WaveguideDesign, CalibrationFit, phase_calibration_fit
from antipt_spdc.config import RunConfig, load_config
