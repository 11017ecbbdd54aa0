"""Encoder weights and received signal power for the cooperation schemes.

Four schemes are supported:

``mrt``
    Maximum ratio transmission. Power weights proportional to the
    instantaneous gain ``l_i * g_i``, phases co-aligned.
``ncjt``
    Non-coherent joint transmission. Equal power split, no phase
    alignment, so member signals add with their random channel phases.
``maxsnr``
    Only the member with the largest ``l_i * g_i`` transmits.
``nearest``
    Only the closest member transmits.

The batch functions work on padded arrays whose last axis runs over cell
members; ``mask`` marks the real entries. The per-cell helpers
(:func:`mrt_assignment` and friends) are thin wrappers around them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import PathLossModel, path_loss
from .errors import InvalidParameterError

__all__ = [
    "SCHEMES",
    "CellChannelState",
    "EncoderAssignment",
    "power_weights",
    "signal_power",
    "mrt_assignment",
    "noncoherent_assignment",
    "max_snr_assignment",
    "nearest_rap_assignment",
    "assign",
]

SCHEMES = ("mrt", "ncjt", "maxsnr", "nearest")

_ALIASES = {
    "mrt": "mrt",
    "ncjt": "ncjt",
    "noncoherent": "ncjt",
    "maxsnr": "maxsnr",
    "max_snr": "maxsnr",
    "nearest": "nearest",
    "nearest_rap": "nearest",
}


def canonical_scheme(name: str) -> str:
    try:
        return _ALIASES[name.lower()]
    except (KeyError, AttributeError):
        raise InvalidParameterError(
            f"unknown scheme {name!r}; choose from {', '.join(SCHEMES)}"
        ) from None


def _one_hot(idx, mask):
    m = mask.shape[-1]
    hot = np.arange(m) == idx[..., None]
    return hot & mask.any(axis=-1, keepdims=True)


def _selected(scheme, gain, distance, mask):
    if mask.shape[-1] == 0:
        return np.zeros(mask.shape, dtype=bool)
    if scheme == "maxsnr":
        idx = np.argmax(np.where(mask, gain, -np.inf), axis=-1)
    else:
        dist = np.broadcast_to(distance, mask.shape)
        idx = np.argmin(np.where(mask, dist, np.inf), axis=-1)
    return _one_hot(idx, mask)


def power_weights(scheme, gain, distance, mask):
    """Per-member transmit power fractions.

    Parameters
    ----------
    scheme : str
        One of :data:`SCHEMES`.
    gain : ndarray, shape (..., M)
        Channel power gains ``l_i * g_i`` of the members toward their own user.
    distance : ndarray, broadcastable to ``gain``
        Member-to-user distances; only read by ``nearest``.
    mask : ndarray of bool, broadcastable to ``gain``
        True for real members, False for padding.

    Returns
    -------
    ndarray, shape of ``gain``
        Non-negative weights summing to 1 over each non-empty cell and
        all zero for empty ones. ``argmax``/``argmin`` return the first
        hit, so ties go to the smallest member index.
    """
    scheme = canonical_scheme(scheme)
    gain = np.asarray(gain, dtype=float)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), gain.shape)
    if scheme == "mrt":
        g = np.where(mask, gain, 0.0)
        total = g.sum(axis=-1, keepdims=True)
        return g / np.where(total > 0, total, 1.0)
    if scheme == "ncjt":
        n = mask.sum(axis=-1, keepdims=True)
        return mask / np.maximum(n, 1)
    return _selected(scheme, gain, distance, mask).astype(float)


def signal_power(scheme, gain, phase, distance, mask):
    """Normalized received power ``S`` at each cell's own user.

    ``phase`` is the channel phase of each member toward the user and
    only matters for ``ncjt``; the coherent schemes cancel it.
    """
    scheme = canonical_scheme(scheme)
    gain = np.asarray(gain, dtype=float)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), gain.shape)
    g = np.where(mask, gain, 0.0)
    if scheme == "mrt":
        return g.sum(axis=-1)
    if scheme == "ncjt":
        n = np.maximum(mask.sum(axis=-1, keepdims=True), 1)
        amp = np.sqrt(g / n) * np.exp(1j * np.asarray(phase))
        return np.abs(amp.sum(axis=-1)) ** 2
    if scheme == "maxsnr":
        return g.max(axis=-1, initial=0.0)
    sel = _selected(scheme, gain, distance, mask)
    return np.where(sel, g, 0.0).sum(axis=-1)


@dataclass(frozen=True)
class CellChannelState:
    """Links from the members of one virtual cell to its user."""

    distance: np.ndarray
    path_gain: np.ndarray
    fading: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        for name in ("distance", "path_gain", "fading", "phase"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (
            self.distance.shape == self.path_gain.shape == self.fading.shape == self.phase.shape
        ):
            raise InvalidParameterError("all link arrays must share one shape")

    def __len__(self):
        return len(self.distance)

    @property
    def gain(self) -> np.ndarray:
        return self.path_gain * self.fading

    @classmethod
    def from_links(cls, distance, fading, phase, model: PathLossModel):
        distance = np.asarray(distance, dtype=float)
        return cls(distance, path_loss(distance, model) if distance.size else distance, fading, phase)


@dataclass(frozen=True)
class EncoderAssignment:
    scheme: str
    weights: np.ndarray
    phase_rotation: np.ndarray
    coherent: bool
    signal_power: float

    @property
    def transmitter(self) -> int | None:
        """Index of the single active member for the selection schemes."""
        if self.scheme in ("maxsnr", "nearest") and len(self.weights):
            return int(np.argmax(self.weights))
        return None


def assign(scheme: str, state: CellChannelState) -> EncoderAssignment:
    scheme = canonical_scheme(scheme)
    n = len(state)
    if n == 0:
        return EncoderAssignment(scheme, np.empty(0), np.empty(0), scheme != "ncjt", 0.0)
    mask = np.ones(n, dtype=bool)
    w = power_weights(scheme, state.gain, state.distance, mask)
    s = float(signal_power(scheme, state.gain, state.phase, state.distance, mask))
    if scheme == "ncjt":
        rotation = np.zeros(n)
    else:
        rotation = np.where(w > 0, -state.phase, 0.0)
    return EncoderAssignment(scheme, w, rotation, scheme != "ncjt", s)


def mrt_assignment(state: CellChannelState) -> EncoderAssignment:
    return assign("mrt", state)


def noncoherent_assignment(state: CellChannelState) -> EncoderAssignment:
    return assign("ncjt", state)


def max_snr_assignment(state: CellChannelState) -> EncoderAssignment:
    return assign("maxsnr", state)


def nearest_rap_assignment(state: CellChannelState) -> EncoderAssignment:
    return assign("nearest", state)
