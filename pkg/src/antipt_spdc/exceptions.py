"""
Module defining library-specific exceptions.
"""

from typing import Optional


class AntiPTError(Exception):
    """
    Base exception for errors raised by antipt_spdc.
    """
    pass


class BasisError(AntiPTError, ValueError):
    """
    Raised when a mode, operator or state does not fit the Fock basis it is used with.
    """
    pass


class RegimeError(AntiPTError):
    """
    Raised when parameters fall outside the regime a closed-form solution covers.
    """
    pass


class SchemeError(AntiPTError, ValueError):
    """
    Raised when an engine is asked to run a scheme it does not support.
    """
    pass


class GaussianStateError(AntiPTError, ValueError):
    """
    Raised when covariance blocks do not describe a physical Gaussian state.
    """
    pass


class IntegrationError(AntiPTError):
    """
    Raised when a propagation run becomes numerically unreliable.

    Attributes:
        z (Optional[float]): Position (m) at which the failure was detected.
    """
    def __init__(self, message: str, z: Optional[float] = None):
        super().__init__(message if z is None else f"{message} (at z={z:.6g} m)")
        self.z = z


class UndefinedObservableError(AntiPTError):
    """
    Raised when a normalized ratio has a vanishing denominator.
    """
    pass


class DesignError(AntiPTError, ValueError):
    """
    Raised by the chip-design calculators.
    """
    pass


class PhaseMatchingError(DesignError):
    """
    Raised when no positive finite poling period exists.
    """
    pass


class FitDegeneracyError(DesignError):
    """
    Raised when calibration data cannot identify the fit parameters.
    """
    pass


class ConfigError(AntiPTError, ValueError):
    """
    Raised for invalid run configurations.
    """
    pass


class SweepPointError(AntiPTError):
    """
    Wraps a solver failure at a single point of a phase sweep.

    Attributes:
        theta (float): Pump relative phase of the failed point.
        cause (AntiPTError): Original error.
    """
    def __init__(self, theta: float, cause: Exception):
        super().__init__(f"theta={theta:.6g}: {cause}")
        self.theta = theta
        self.cause = cause
