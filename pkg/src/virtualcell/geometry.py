"""Point processes on a finite window: RAP fields, hard-core user sets, virtual cells.

Everything here takes an explicit ``numpy.random.Generator``; nothing
touches global random state, so independent streams can be used from
parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .config import NetworkConfig
from .errors import InvalidParameterError

__all__ = [
    "Window",
    "PointSet",
    "HardCoreSet",
    "VirtualCellGeometry",
    "sample_ppp",
    "matern_hardcore_thinning",
    "typical_user_scenario",
    "form_virtual_cell",
    "form_virtual_cells",
    "scheduling_probability",
]


@dataclass(frozen=True)
class Window:
    """Rectangle ``[0, width) x [0, height)``.

    With ``metric="toroidal"`` opposite edges are identified, so every
    location sees the same statistical environment. ``"euclidean"``
    keeps plain distances; combined with a typical user at the center the
    rest of the window then acts as a guard region.
    """

    width: float
    height: float
    metric: str = "toroidal"

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise InvalidParameterError(
                f"window sides must be positive, got {self.width} x {self.height}"
            )
        if self.metric not in ("toroidal", "euclidean"):
            raise InvalidParameterError(f"unknown metric {self.metric!r}")

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> np.ndarray:
        return np.array([self.width / 2.0, self.height / 2.0])

    @property
    def toroidal(self) -> bool:
        return self.metric == "toroidal"

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(points)
        return (
            (p[:, 0] >= 0) & (p[:, 0] < self.width) & (p[:, 1] >= 0) & (p[:, 1] < self.height)
        )

    def displacement(self, a, b) -> np.ndarray:
        """Shortest vector from ``b`` to ``a`` under the window metric."""
        delta = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        if self.toroidal:
            size = np.array([self.width, self.height])
            delta = delta - size * np.round(delta / size)
        return delta

    def distance(self, a, b) -> np.ndarray:
        return np.hypot(*np.moveaxis(self.displacement(a, b), -1, 0))

    def tree(self, points) -> cKDTree:
        if self.toroidal:
            # cKDTree wants coordinates strictly inside [0, boxsize)
            pts = np.mod(points, [self.width, self.height])
            return cKDTree(pts, boxsize=[self.width, self.height])
        return cKDTree(points)

    @classmethod
    def from_config(cls, cfg: NetworkConfig) -> "Window":
        return cls(cfg.window_width, cfg.window_height, cfg.metric)


@dataclass(frozen=True)
class PointSet:
    """Finite set of planar points (meters) inside a window."""

    points: np.ndarray
    window: Window

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def distances_from(self, location) -> np.ndarray:
        return self.window.distance(self.points, location)

    def subset(self, mask) -> "PointSet":
        return PointSet(self.points[mask], self.window)


@dataclass(frozen=True)
class HardCoreSet:
    """Points of a thinning that kept a minimum pairwise separation.

    ``retained_index`` maps back into the candidate set the points were
    thinned from; ``marks`` are the candidates' thinning marks.
    """

    retained: PointSet
    min_separation: float
    retained_index: np.ndarray | None = None
    marks: np.ndarray | None = None

    def __len__(self):
        return len(self.retained)

    @property
    def points(self) -> np.ndarray:
        return self.retained.points


@dataclass(frozen=True)
class VirtualCellGeometry:
    """A user together with every RAP within ``radius`` of it."""

    user: np.ndarray
    members: np.ndarray
    radius: float
    member_index: np.ndarray
    distances: np.ndarray

    def __len__(self):
        return len(self.members)

    @property
    def empty(self) -> bool:
        return len(self.members) == 0


def sample_ppp(intensity: float, window: Window, rng: np.random.Generator) -> PointSet:
    """Homogeneous Poisson point process of ``intensity`` points per m^2."""
    if not (np.isfinite(intensity) and intensity >= 0):
        raise InvalidParameterError(f"intensity must be >= 0, got {intensity}")
    n = rng.poisson(intensity * window.area)
    xy = rng.uniform(size=(n, 2)) * [window.width, window.height]
    return PointSet(xy, window)


def matern_hardcore_thinning(
    candidates: PointSet, D: float, rng: np.random.Generator | None = None, marks=None
) -> HardCoreSet:
    """Matérn type-II thinning with hard-core distance ``D``.

    Every candidate gets a uniform mark and survives iff no other
    candidate (thinned or not) within distance ``D`` has a smaller mark.
    For a Poisson input of intensity ``lam`` the survival probability is
    ``(1 - exp(-lam*pi*D**2)) / (lam*pi*D**2)``.

    ``marks`` may be passed explicitly; otherwise they are drawn from ``rng``.
    """
    if not (np.isfinite(D) and D >= 0):
        raise InvalidParameterError(f"hard-core distance must be >= 0, got {D}")
    n = len(candidates)
    if marks is None:
        if rng is None:
            raise InvalidParameterError("either rng or marks is required")
        marks = rng.uniform(size=n)
    marks = np.asarray(marks, dtype=float)
    if marks.shape != (n,):
        raise InvalidParameterError(f"need {n} marks, got shape {marks.shape}")

    keep = np.ones(n, dtype=bool)
    if D > 0 and n > 1:
        tree = candidates.window.tree(candidates.points)
        pairs = tree.query_pairs(D, output_type="ndarray")
        if len(pairs):
            i, j = pairs[:, 0], pairs[:, 1]
            # query_pairs is inclusive at D; exclusion needs distance < D
            close = candidates.window.distance(candidates.points[i], candidates.points[j]) < D
            i, j = i[close], j[close]
            loser = np.where(marks[i] > marks[j], i, j)
            keep[loser] = False
    idx = np.flatnonzero(keep)
    return HardCoreSet(candidates.subset(keep), float(D), retained_index=idx, marks=marks)


def typical_user_scenario(cfg: NetworkConfig, rng: np.random.Generator):
    """Realize one network around a typical user at the window center.

    Co-channel users come from Matérn-II thinning of a PPP of contending
    users; any survivor closer than ``D`` to the typical user is then
    removed, i.e. the typical user holds an exclusion disc of radius ``D``.
    RAPs are an independent PPP.

    Returns
    -------
    typical_user : ndarray, shape (2,)
    cochannel_users : HardCoreSet
        The other scheduled users (the typical user is not included).
    raps : PointSet
    """
    window = Window.from_config(cfg)
    center = window.center
    D = cfg.min_separation

    candidates = sample_ppp(cfg.lambda_u, window, rng)
    thinned = matern_hardcore_thinning(candidates, D, rng)
    outside = thinned.retained.distances_from(center) >= D
    cochannel = HardCoreSet(
        thinned.retained.subset(outside),
        D,
        retained_index=thinned.retained_index[outside],
        marks=thinned.marks,
    )
    raps = sample_ppp(cfg.lambda_r, window, rng)
    return center, cochannel, raps


def form_virtual_cell(user, raps: PointSet, C: float) -> VirtualCellGeometry:
    """Collect every RAP within distance ``C`` of ``user`` (boundary included)."""
    if not (np.isfinite(C) and C >= 0):
        raise InvalidParameterError(f"cell radius must be >= 0, got {C}")
    user = np.asarray(user, dtype=float)
    d = raps.distances_from(user) if len(raps) else np.empty(0)
    idx = np.flatnonzero(d <= C)
    return VirtualCellGeometry(user, raps.points[idx], float(C), idx, d[idx])


def form_virtual_cells(users, raps: PointSet, C: float, tree: cKDTree | None = None):
    """Virtual cells of many users at once.

    Same membership rule as :func:`form_virtual_cell`; a KD-tree only
    narrows the candidates before the exact distance test.
    """
    if not (np.isfinite(C) and C >= 0):
        raise InvalidParameterError(f"cell radius must be >= 0, got {C}")
    users = np.asarray(users, dtype=float).reshape(-1, 2)
    if len(raps) == 0 or len(users) == 0:
        return [form_virtual_cell(u, raps, C) for u in users]
    window = raps.window
    if tree is None:
        tree = window.tree(raps.points)
    q_users = np.mod(users, [window.width, window.height]) if window.toroidal else users
    hits = tree.query_ball_point(q_users, C * (1 + 1e-9) + 1e-9)
    cells = []
    for u, cand in zip(users, hits):
        cand = np.asarray(cand, dtype=np.intp)
        d = window.distance(raps.points[cand], u)
        ok = d <= C
        idx = cand[ok]
        order = np.argsort(idx)
        idx, dist = idx[order], d[ok][order]
        cells.append(VirtualCellGeometry(u, raps.points[idx], float(C), idx, dist))
    return cells


def scheduling_probability(lambda_u: float, D: float) -> float:
    """Probability that a contending user wins the channel under exclusion radius ``D``."""
    if lambda_u < 0 or D < 0:
        raise InvalidParameterError("lambda_u and D must be non-negative")
    mu = lambda_u * np.pi * D * D
    if mu == 0:
        return 1.0
    return float(-np.expm1(-mu) / mu)
