"""Path loss, Rayleigh fading and noise primitives shared by both engines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergentInterferenceError, InvalidParameterError

__all__ = [
    "PathLossModel",
    "LinkFading",
    "path_loss",
    "sample_link_fadings",
    "noise_power",
    "dbm_to_watts",
]


@dataclass(frozen=True)
class PathLossModel:
    """Bounded power-law path loss ``max(d, d0) ** -alpha``.

    Parameters
    ----------
    d0 : float
        Reference distance in meters; the gain is flat below it.
    alpha : float
        Path-loss exponent. Must exceed 2 so that the aggregate
        interference of an infinite network stays finite.
    """

    d0: float = 10.0
    alpha: float = 3.6

    def __post_init__(self):
        if not self.d0 > 0:
            raise InvalidParameterError(f"d0 must be positive, got {self.d0}")
        if not self.alpha > 2:
            raise DivergentInterferenceError(
                f"alpha must be > 2, got {self.alpha}: with alpha <= 2 the "
                "interference summed over an infinite plane diverges"
            )

    @property
    def peak_gain(self) -> float:
        """Gain inside the reference distance, ``d0 ** -alpha``."""
        return self.d0 ** -self.alpha

    def __call__(self, d):
        return path_loss(d, self)


def path_loss(d, model: PathLossModel):
    """Evaluate ``max(d, d0) ** -alpha`` elementwise.

    Scalars in give a Python float back; arrays give arrays.
    """
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr < 0):
        raise InvalidParameterError("distance must be non-negative")
    out = np.maximum(d_arr, model.d0) ** -model.alpha
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class LinkFading:
    """Rayleigh fading draws for a batch of links.

    ``gain`` holds the unit-mean exponential power gains and ``phase``
    the uniform phases in [0, 2*pi). Both arrays share one shape.
    """

    gain: np.ndarray
    phase: np.ndarray

    def __len__(self):
        return len(self.gain)

    def __iter__(self):
        return iter(zip(self.gain, self.phase))


def sample_link_fadings(n, rng: np.random.Generator) -> LinkFading:
    """Draw ``n`` independent Rayleigh links.

    ``n`` may be an int or a shape tuple; the latter is used by the
    simulator to draw whole (fading, cell, member) blocks at once.
    """
    shape = (n,) if np.isscalar(n) else tuple(n)
    if any(s < 0 for s in shape):
        raise InvalidParameterError(f"link count must be non-negative, got {n}")
    gain = rng.standard_exponential(shape)
    phase = rng.uniform(0.0, 2.0 * np.pi, shape)
    return LinkFading(gain=gain, phase=phase)


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def noise_power(bandwidth: float, noise_psd_dbm_hz: float = -174.0) -> float:
    """Thermal noise power in watts over ``bandwidth`` Hz."""
    if not bandwidth > 0:
        raise InvalidParameterError(f"bandwidth must be positive, got {bandwidth}")
    noise_dbm = noise_psd_dbm_hz + 10.0 * np.log10(bandwidth)
    return float(dbm_to_watts(noise_dbm))
