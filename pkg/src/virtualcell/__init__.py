"""User-centric joint transmission in virtual-cell ultra-dense networks.

Two engines evaluate the same model: a Monte Carlo simulator
(:mod:`virtualcell.simulator`) and a Laplace-transform quadrature engine
(:mod:`virtualcell.analytic`).
"""

from .channel import PathLossModel
from .config import NetworkConfig, baseline, km, per_km2
from .errors import DivergentInterferenceError, InvalidParameterError, NumericalFailureError

__version__ = "0.1.0"
