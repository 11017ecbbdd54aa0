"""Monte Carlo engine for the typical-user throughput.

A *drop* is one realization of RAP and user locations. Each drop is
reused for several independent fading realizations; the resulting
two-level samples are aggregated with a cluster-robust variance
(between-drop spread of the drop means), which stays honest when samples
inside a drop are correlated.

Per-drop random streams come from ``SeedSequence(seed, spawn_key=(i,))``,
so a run is bit-reproducible no matter how drops are distributed over
worker processes.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .channel import path_loss
from .config import NetworkConfig
from .errors import InvalidParameterError
from .geometry import (
    form_virtual_cell,
    form_virtual_cells,
    scheduling_probability,
    typical_user_scenario,
)
from .schemes import canonical_scheme, power_weights, signal_power

log = logging.getLogger(__name__)

__all__ = [
    "SinrSamples",
    "ThroughputEstimate",
    "MeanEstimate",
    "EtaPoint",
    "run_drop",
    "run_drop_schemes",
    "simulate",
    "estimate_tau",
    "estimate_tau_schemes",
    "estimate_eta",
    "sample_typical_signal",
    "empirical_weight_moment",
    "empirical_laplace",
    "drop_rng",
]


@dataclass(frozen=True)
class SinrSamples:
    """Signal and interference powers, both normalized by the transmit power."""

    S: np.ndarray
    J: np.ndarray
    noise_over_power: float

    def __post_init__(self):
        object.__setattr__(self, "S", np.asarray(self.S, dtype=float))
        object.__setattr__(self, "J", np.asarray(self.J, dtype=float))
        if self.S.shape != self.J.shape:
            raise InvalidParameterError("S and J must have the same shape")
        if np.any(self.S < 0) or np.any(self.J < 0):
            raise InvalidParameterError("signal and interference powers must be >= 0")

    def __len__(self):
        return len(self.S)

    @property
    def sinr(self) -> np.ndarray:
        return self.S / (self.J + self.noise_over_power)

    def throughput(self, bandwidth: float) -> np.ndarray:
        """Per-sample Shannon rate ``B log2(1 + SINR)`` in bit/s."""
        return bandwidth * np.log1p(self.sinr) / np.log(2.0)


@dataclass(frozen=True)
class MeanEstimate:
    mean: float
    stderr: float
    n: int

    def within(self, value: float, n_se: float = 3.0) -> bool:
        return abs(self.mean - value) <= n_se * self.stderr


@dataclass(frozen=True)
class ThroughputEstimate:
    """Monte Carlo estimate of the mean user throughput (bit/s).

    ``stderr`` is the standard error of ``mean`` from the spread of the
    per-drop means. ``within_drop_var`` and ``between_drop_var`` are the
    two variance components of a per-sample throughput, for diagnostics.
    """

    mean: float
    ci95_halfwidth: float
    n_samples: int
    bandwidth: float
    n_drops: int
    stderr: float
    within_drop_var: float = float("nan")
    between_drop_var: float = float("nan")

    @property
    def ci95(self) -> tuple[float, float]:
        return self.mean - self.ci95_halfwidth, self.mean + self.ci95_halfwidth

    @classmethod
    def from_drops(cls, drop_means, drop_vars, fadings_per_drop, bandwidth):
        """Aggregate balanced two-level samples.

        Parameters
        ----------
        drop_means, drop_vars : array_like, shape (n_drops,)
            Mean and (ddof=1) variance of the throughput samples of each drop.
        fadings_per_drop : int
        bandwidth : float
        """
        m = np.asarray(drop_means, dtype=float)
        v = np.asarray(drop_vars, dtype=float)
        n_drops = len(m)
        if n_drops == 0:
            raise InvalidParameterError("need at least one drop")
        F = int(fadings_per_drop)
        mean = float(m.mean())
        within = float(v.mean()) if F > 1 else 0.0
        if n_drops > 1:
            var_means = float(m.var(ddof=1))
            stderr = np.sqrt(var_means / n_drops)
            between = max(var_means - within / F, 0.0)
            q = stats.t.ppf(0.975, n_drops - 1)
        else:
            # a single drop carries no between-drop information
            stderr = np.sqrt(within / F) if F > 1 else float("inf")
            between = float("nan")
            q = stats.t.ppf(0.975, F - 1) if F > 1 else float("inf")
        return cls(
            mean=mean,
            ci95_halfwidth=float(q * stderr),
            n_samples=n_drops * F,
            bandwidth=float(bandwidth),
            n_drops=n_drops,
            stderr=float(stderr),
            within_drop_var=within,
            between_drop_var=between,
        )


@dataclass(frozen=True)
class EtaPoint:
    D: float
    eta: float
    ci95_halfwidth: float
    tau: ThroughputEstimate


def drop_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


# ---------------------------------------------------------------------------
# one drop
# ---------------------------------------------------------------------------


@dataclass
class _DropLayout:
    """Padded per-drop arrays; ``pos_*`` index into the union of active RAPs."""

    n_active: int
    typ_dist: np.ndarray
    typ_pos: np.ndarray
    own_dist: np.ndarray  # (K, M) member -> own user
    cross_dist: np.ndarray  # (K, M) member -> typical user
    mask: np.ndarray
    pos: np.ndarray


def _layout(cfg: NetworkConfig, rng: np.random.Generator) -> _DropLayout:
    center, users, raps = typical_user_scenario(cfg, rng)
    C = cfg.cell_radius
    window = raps.window
    typ = form_virtual_cell(center, raps, C)
    tree = window.tree(raps.points) if len(raps) else None
    cells = [c for c in form_virtual_cells(users.points, raps, C, tree) if not c.empty]

    K = len(cells)
    M = max((len(c) for c in cells), default=0)
    own = np.zeros((K, M))
    mask = np.zeros((K, M), dtype=bool)
    idx = np.zeros((K, M), dtype=np.intp)
    for k, c in enumerate(cells):
        n = len(c)
        own[k, :n] = c.distances
        mask[k, :n] = True
        idx[k, :n] = c.member_index

    active, inverse = np.unique(
        np.concatenate([typ.member_index, idx[mask]]), return_inverse=True
    )
    n0 = len(typ)
    pos = np.zeros((K, M), dtype=np.intp)
    pos[mask] = inverse[n0:]
    cross = np.zeros((K, M))
    if K:
        cross[mask] = window.distance(raps.points[idx[mask]], center)
    return _DropLayout(
        n_active=len(active),
        typ_dist=typ.distances,
        typ_pos=inverse[:n0],
        own_dist=own,
        cross_dist=cross,
        mask=mask,
        pos=pos,
    )


def _evaluate(lay: _DropLayout, cfg: NetworkConfig, schemes, g0, theta0, g_own):
    """S and J for every scheme given the drop layout and its fading draws.

    ``g0``/``theta0`` have shape (F, n_active): one link from every active
    RAP toward the typical user, shared by that RAP's contribution to S
    (if it serves the typical user) and to J (if it serves someone else).
    ``g_own`` has shape (F, K, M): links from members to their own user.
    """
    pl = cfg.path_loss
    F = g0.shape[0]
    typ_gain = path_loss(lay.typ_dist, pl) * g0[:, lay.typ_pos] if len(lay.typ_pos) else np.zeros((F, 0))
    typ_phase = theta0[:, lay.typ_pos]
    typ_mask = np.ones(len(lay.typ_pos), dtype=bool)

    own_gain = np.where(lay.mask, path_loss(lay.own_dist, pl), 0.0) * g_own
    interf_gain = np.where(lay.mask, path_loss(lay.cross_dist, pl), 0.0) * g0[:, lay.pos]

    out = {}
    for s in schemes:
        S = signal_power(s, typ_gain, typ_phase, lay.typ_dist, typ_mask)
        if lay.mask.size:
            w = power_weights(s, own_gain, lay.own_dist, lay.mask)
            J = (interf_gain * w).sum(axis=(-2, -1))
        else:
            J = np.zeros(F)
        out[s] = SinrSamples(np.broadcast_to(S, (F,)).copy(), J, cfg.noise_over_power)
    return out


def run_drop_schemes(cfg: NetworkConfig, schemes, rng: np.random.Generator, fadings_per_drop: int):
    """Realize one drop and evaluate several schemes on identical draws.

    Returns
    -------
    dict
        Scheme name -> :class:`SinrSamples` with ``fadings_per_drop`` entries.
    """
    F = int(fadings_per_drop)
    if F < 1:
        raise InvalidParameterError("fadings_per_drop must be >= 1")
    schemes = [canonical_scheme(s) for s in schemes]
    lay = _layout(cfg, rng)
    g0 = rng.standard_exponential((F, lay.n_active))
    theta0 = rng.uniform(0.0, 2.0 * np.pi, (F, lay.n_active))
    g_own = rng.standard_exponential((F,) + lay.mask.shape)
    return _evaluate(lay, cfg, schemes, g0, theta0, g_own)


def run_drop(cfg: NetworkConfig, scheme: str, rng: np.random.Generator, fadings_per_drop: int) -> SinrSamples:
    """One geometry realization evaluated under ``fadings_per_drop`` fading draws."""
    s = canonical_scheme(scheme)
    return run_drop_schemes(cfg, [s], rng, fadings_per_drop)[s]


# ---------------------------------------------------------------------------
# many drops
# ---------------------------------------------------------------------------


def _drop_stats(args):
    cfg, schemes, seed, lo, hi, F = args
    means = np.empty((len(schemes), hi - lo))
    var = np.empty_like(means)
    for j, i in enumerate(range(lo, hi)):
        res = run_drop_schemes(cfg, schemes, drop_rng(seed, i), F)
        for a, s in enumerate(schemes):
            r = res[s].throughput(cfg.bandwidth)
            means[a, j] = r.mean()
            var[a, j] = r.var(ddof=1) if F > 1 else 0.0
    return means, var


def simulate(cfg: NetworkConfig, schemes, n_drops: int, fadings_per_drop: int, seed: int, workers: int = 1):
    """Per-drop throughput means and variances for each scheme.

    Returns ``{scheme: (means, variances)}``, each an array of length
    ``n_drops`` in drop order.
    """
    if n_drops < 1:
        raise InvalidParameterError("n_drops must be >= 1")
    schemes = [canonical_scheme(s) for s in schemes]
    F = int(fadings_per_drop)
    if workers <= 1 or n_drops < 2:
        chunks = [(cfg, schemes, seed, 0, n_drops, F)]
        parts = [_drop_stats(c) for c in chunks]
    else:
        bounds = np.linspace(0, n_drops, min(workers * 4, n_drops) + 1).astype(int)
        chunks = [(cfg, schemes, seed, a, b, F) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_drop_stats, chunks))
    means = np.concatenate([p[0] for p in parts], axis=1)
    var = np.concatenate([p[1] for p in parts], axis=1)
    return {s: (means[a], var[a]) for a, s in enumerate(schemes)}


def estimate_tau_schemes(cfg, schemes, n_drops, fadings_per_drop, seed, workers=1):
    """Throughput estimates for several schemes from common drops and fadings."""
    raw = simulate(cfg, schemes, n_drops, fadings_per_drop, seed, workers)
    return {
        s: ThroughputEstimate.from_drops(m, v, fadings_per_drop, cfg.bandwidth)
        for s, (m, v) in raw.items()
    }


def estimate_tau(cfg: NetworkConfig, scheme: str, n_drops: int, fadings_per_drop: int, seed: int, workers: int = 1) -> ThroughputEstimate:
    """Monte Carlo mean of ``B log2(1 + SINR)`` for the typical user."""
    s = canonical_scheme(scheme)
    return estimate_tau_schemes(cfg, [s], n_drops, fadings_per_drop, seed, workers)[s]


def estimate_eta(cfg, scheme, D_grid, n_drops, fadings_per_drop, seed, cell_ratio=0.5, workers=1):
    """Spatial throughput ``lambda_u * p_r(D) * tau(D)`` over a grid of exclusion radii.

    With ``cell_ratio`` set the cell radius follows ``C = cell_ratio * D``;
    pass ``None`` to keep ``cfg.cell_radius``. Each grid point gets its own
    child seed. Units: bit/s/m^2.
    """
    D_grid = np.asarray(D_grid, dtype=float)
    if D_grid.size == 0:
        raise InvalidParameterError("D grid must be non-empty")
    out = []
    for i, D in enumerate(D_grid):
        c = cfg.replace(min_separation=float(D))
        if cell_ratio is not None:
            c = c.replace(cell_radius=float(cell_ratio * D))
        tau = estimate_tau(c, scheme, n_drops, fadings_per_drop, _child_seed(seed, i), workers)
        density = cfg.lambda_u * scheduling_probability(cfg.lambda_u, float(D))
        out.append(EtaPoint(float(D), density * tau.mean, density * tau.ci95_halfwidth, tau))
    return out


def _child_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(1_000_003, index)).generate_state(1)[0])


# ---------------------------------------------------------------------------
# oracles for the analytic engine
# ---------------------------------------------------------------------------


def _disc_ppp(intensity, radius, n, rng):
    """``n`` independent PPP realizations on a disc, flattened.

    Returns the owner index of every point and its distance from the
    disc center.
    """
    counts = rng.poisson(intensity * np.pi * radius * radius, size=n)
    owner = np.repeat(np.arange(n), counts)
    r = radius * np.sqrt(rng.uniform(size=counts.sum()))
    return owner, r


def sample_typical_signal(cfg: NetworkConfig, n: int, rng: np.random.Generator, scheme: str = "mrt") -> np.ndarray:
    """Signal power of ``n`` independent typical-user virtual cells.

    Each cell is a fresh PPP restricted to the disc of radius ``C``
    around the user, with fresh Rayleigh fading.
    """
    scheme = canonical_scheme(scheme)
    owner, r = _disc_ppp(cfg.lambda_r, cfg.cell_radius, n, rng)
    g = rng.standard_exponential(len(r))
    theta = rng.uniform(0.0, 2.0 * np.pi, len(r))
    gain = path_loss(r, cfg.path_loss) * g if len(r) else r
    if scheme == "mrt":
        return np.bincount(owner, weights=gain, minlength=n)
    counts = np.bincount(owner, minlength=n)
    M = max(int(counts.max(initial=0)), 1)
    slot = np.arange(len(r)) - np.repeat(np.cumsum(counts) - counts, counts)
    pad_g = np.zeros((n, M))
    pad_t = np.zeros((n, M))
    pad_d = np.zeros((n, M))
    mask = np.zeros((n, M), dtype=bool)
    pad_g[owner, slot] = gain
    pad_t[owner, slot] = theta
    pad_d[owner, slot] = r
    mask[owner, slot] = True
    return signal_power(scheme, pad_g, pad_t, pad_d, mask)


def empirical_weight_moment(cfg: NetworkConfig, r: float, n_realizations: int, seed) -> MeanEstimate:
    """Brute-force mean MRT power weight of a RAP pinned at distance ``r``.

    The rest of the cell is a fresh PPP on the disc of radius ``C``; all
    fadings are fresh per realization.
    """
    C = cfg.cell_radius
    if not 0 <= r <= C:
        raise InvalidParameterError(f"r must lie in [0, C={C}], got {r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = int(n_realizations)
    owner, dist = _disc_ppp(cfg.lambda_r, C, n, rng)
    others = np.bincount(
        owner, weights=path_loss(dist, cfg.path_loss) * rng.standard_exponential(len(dist)), minlength=n
    )
    own = path_loss(r, cfg.path_loss) * rng.standard_exponential(n)
    w = own / (own + others)
    return MeanEstimate(float(w.mean()), float(w.std(ddof=1) / np.sqrt(n)), n)


def empirical_laplace(samples, t, return_stderr: bool = False):
    """Sample mean of ``exp(-t x)``; vectorized over ``t``."""
    x = np.asarray(samples, dtype=float).ravel()
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise InvalidParameterError("t must be non-negative")
    e = np.exp(-np.multiply.outer(t_arr, x))
    mean = e.mean(axis=-1) if x.size else np.ones_like(t_arr)
    if not return_stderr:
        return mean
    se = e.std(axis=-1, ddof=1) / np.sqrt(x.size)
    return mean, se
