"""
Deadbanded, saturating assistive torque law.

Angles and errors in deg, torque in N*m, impedance g in deg^-2.
"""
from dataclasses import dataclass
import logging

import numpy as np

from .exceptions import ContractViolation, InvalidConfigurationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForceFieldConfig:
    tau_max: float = 5.0
    theta_db: float = 1.0

    def __post_init__(self):
        if not self.tau_max > 0:
            raise InvalidConfigurationError(f"tau_max must be > 0, got {self.tau_max}")
        if not self.theta_db >= 0:
            raise InvalidConfigurationError(f"theta_db must be >= 0, got {self.theta_db}")


@dataclass(frozen=True)
class TrackingError:
    raw: float
    deadbanded: float


def deadband(raw, theta_db):
    """Shrink errors toward zero by theta_db; anything inside the band becomes 0."""
    raw = np.asarray(raw, dtype=float)
    return np.sign(raw) * np.maximum(np.abs(raw) - theta_db, 0.0)


def deadband_error(theta_d, theta_m, theta_db):
    """
    Tracking error between desired and measured angle.

    Args:
        theta_d (float): desired angle (deg)
        theta_m (float): measured angle (deg)
        theta_db (float): deadband half-width (deg)

    Returns:
        TrackingError: raw and deadbanded error
    """
    if theta_db < 0:
        raise ContractViolation(f"deadband must be >= 0, got {theta_db}")
    raw = float(theta_d) - float(theta_m)
    return TrackingError(raw=raw, deadbanded=float(deadband(raw, theta_db)))


def assist_torque(err, g, cfg):
    """
    Restoring torque tau = sign(e) * tau_max * (1 - exp(-g*e^2)) for one sample.

    |tau| < tau_max holds analytically, but in double precision 1 - exp(-x)
    rounds to exactly 1 once g*e^2 passes about 37, so large errors return
    +/- tau_max itself.
    """
    if g < 0:
        raise ContractViolation(f"impedance must be clamped to g >= 0 before actuation, got {g}")
    e = err.deadbanded
    return float(np.sign(e) * cfg.tau_max * -np.expm1(-g * e * e))


def assist_torque_array(deadbanded, g, cfg):
    """Vectorised torque law over a whole stride of samples."""
    deadbanded = np.asarray(deadbanded, dtype=float)
    g = np.asarray(g, dtype=float)
    if np.any(g < 0):
        raise ContractViolation("impedance must be clamped to g >= 0 before actuation")
    return np.sign(deadbanded) * cfg.tau_max * -np.expm1(-g * deadbanded * deadbanded)
