"""Scenario parameters in SI units.

All lengths are meters and densities are per square meter. The helpers
``km`` and ``per_km2`` exist so call sites can be written in the units
the deployment is usually described in.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .channel import PathLossModel, dbm_to_watts, noise_power
from .errors import InvalidParameterError

__all__ = ["NetworkConfig", "baseline", "km", "per_km2"]


def km(x):
    return x * 1e3


def per_km2(x):
    return x * 1e-6


@dataclass(frozen=True)
class NetworkConfig:
    """One network scenario.

    Defaults reproduce the reference deployment: 50 RAPs/km^2,
    20 contending users/km^2, 0.4 km exclusion, 0.2 km virtual cells,
    alpha = 3.6 with a 10 m clamp, 10 MHz at -174 dBm/Hz, 24 dBm per user,
    on a 10 km x 10 km toroidal window.
    """

    lambda_r: float = per_km2(50.0)
    lambda_u: float = per_km2(20.0)
    cell_radius: float = km(0.2)
    min_separation: float = km(0.4)
    path_loss: PathLossModel = field(default_factory=PathLossModel)
    bandwidth: float = 10e6
    noise_psd_dbm_hz: float = -174.0
    tx_power_dbm: float = 24.0
    window_width: float = km(10.0)
    window_height: float = km(10.0)
    metric: str = "toroidal"

    def __post_init__(self):
        for name in ("lambda_r", "lambda_u", "cell_radius", "min_separation"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise InvalidParameterError(f"{name} must be finite and >= 0, got {v}")
        if not self.bandwidth > 0:
            raise InvalidParameterError(f"bandwidth must be positive, got {self.bandwidth}")
        if not (self.window_width > 0 and self.window_height > 0):
            raise InvalidParameterError("window sides must be positive")
        if self.metric not in ("toroidal", "euclidean"):
            raise InvalidParameterError(f"unknown metric {self.metric!r}")

    @property
    def tx_power(self) -> float:
        return float(dbm_to_watts(self.tx_power_dbm))

    @property
    def noise_power(self) -> float:
        return noise_power(self.bandwidth, self.noise_psd_dbm_hz)

    @property
    def noise_over_power(self) -> float:
        """Noise normalized by the per-user transmit power."""
        return self.noise_power / self.tx_power

    def replace(self, **changes) -> "NetworkConfig":
        return dataclasses.replace(self, **changes)


def baseline() -> NetworkConfig:
    return NetworkConfig()
