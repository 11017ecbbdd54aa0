"""Laplace-transform evaluation of the typical-user throughput under MRT.

The throughput follows from the Laplace transforms of the signal power
``S`` and the interference power ``J``::

    tau = B/ln2 * int_0^inf exp(-t N) L_J(t) (1 - L_S(t)) / t dt

with ``N`` the normalized noise power. ``L_S`` is exact for a PPP of
serving RAPs. ``L_J`` approximates the co-channel users beyond the
exclusion radius ``D`` by a PPP of intensity ``lambda_u p_r(D)`` and
replaces every interfering RAP's power weight by its conditional mean
``W(r)``. Virtual cells closer than the split distance ``d`` are
integrated exactly over their RAP disc; farther ones are treated as a
single Rayleigh transmitter at the user location.

Semi-infinite integrals are mapped to finite ones (``t = u/(1-u)`` for
the weight moment, ``t = exp(x)`` for the throughput, ``rho = exp(y)``
for the interference field) and handed to QUADPACK; the RAP-disc double
integral uses a fixed tensor Gauss-Legendre rule.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .channel import PathLossModel, path_loss
from .config import NetworkConfig
from .errors import DivergentInterferenceError, InvalidParameterError, NumericalFailureError
from .geometry import scheduling_probability

__all__ = [
    "AnalyticParams",
    "QuadratureSpec",
    "WeightMomentTable",
    "laplace_S",
    "signal_deficit",
    "mean_signal",
    "weight_moment",
    "build_weight_table",
    "laplace_I_rho",
    "laplace_I_rho_far",
    "far_tail_integral",
    "laplace_J",
    "tau_from_laplace",
    "tau_analytic",
    "tau_farfield_only",
    "eta_analytic",
]


@dataclass(frozen=True)
class AnalyticParams:
    """Model parameters in SI units.

    ``split`` is the near/far distance ``d``; ``None`` selects
    ``max(5 D, 10 C)``.
    """

    lambda_r: float
    lambda_u: float
    C: float
    D: float
    path_loss: PathLossModel
    noise_over_power: float
    bandwidth: float
    split: float | None = None

    def __post_init__(self):
        for name in ("lambda_r", "lambda_u", "C", "D", "noise_over_power"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise InvalidParameterError(f"{name} must be finite and >= 0, got {v}")
        if not self.bandwidth > 0:
            raise InvalidParameterError("bandwidth must be positive")
        if self.split is not None and self.split < self.D:
            raise InvalidParameterError(
                f"near/far split d={self.split} must be >= D={self.D}"
            )

    @classmethod
    def from_config(cls, cfg: NetworkConfig, split: float | None = None) -> "AnalyticParams":
        return cls(
            lambda_r=cfg.lambda_r,
            lambda_u=cfg.lambda_u,
            C=cfg.cell_radius,
            D=cfg.min_separation,
            path_loss=cfg.path_loss,
            noise_over_power=cfg.noise_over_power,
            bandwidth=cfg.bandwidth,
            split=split,
        )

    @property
    def alpha(self) -> float:
        return self.path_loss.alpha

    @property
    def d0(self) -> float:
        return self.path_loss.d0

    @property
    def near_far_split(self) -> float:
        if self.split is not None:
            return self.split
        return max(5.0 * self.D, 10.0 * self.C)

    @property
    def empty_cell_probability(self) -> float:
        return float(np.exp(-self.lambda_r * np.pi * self.C**2))

    @property
    def user_density(self) -> float:
        """Density of scheduled co-channel users, ``lambda_u p_r(D)``."""
        return self.lambda_u * scheduling_probability(self.lambda_u, self.D)

    def replace(self, **changes) -> "AnalyticParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and node counts for the analytic engine.

    rtol, atol
        Passed to every adaptive QUADPACK call.
    limit
        Maximum number of adaptive subintervals.
    n_radial, n_angular
        Gauss-Legendre orders for the RAP-disc integral (radial nodes are
        split between the flat part ``r < d0`` and the rest).
    series_eps
        Below ``t = series_eps / l(d0)`` the throughput integrand is
        replaced by its small-``t`` limit ``E[S]``.
    noise_cutoff
        Outer throughput integral stops where ``t N`` reaches this value.
    table_tol
        Target absolute interpolation error of the weight-moment table.
    """

    rtol: float = 1e-6
    atol: float = 1e-12
    limit: int = 200
    n_radial: int = 32
    n_angular: int = 64
    series_eps: float = 1e-6
    noise_cutoff: float = 60.0
    table_tol: float = 1e-5

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0 and self.table_tol > 0):
            raise InvalidParameterError("quadrature tolerances must be positive")
        if self.limit < 1 or self.n_radial < 4 or self.n_angular < 4:
            raise InvalidParameterError("quadrature node counts too small")

    def tightened(self, factor: float = 0.5) -> "QuadratureSpec":
        """Copy with every tolerance multiplied by ``factor``."""
        return dataclasses.replace(
            self,
            rtol=self.rtol * factor,
            atol=self.atol * factor,
            table_tol=self.table_tol * factor,
        )


DEFAULT_QUADRATURE = QuadratureSpec()


def _quad(f, a, b, q: QuadratureSpec, what: str, points=None):
    if b <= a:
        return 0.0
    pts = None
    if points is not None:
        pts = sorted(p for p in points if a < p < b) or None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info, *rest = integrate.quad(
            f, a, b, epsabs=q.atol, epsrel=q.rtol, limit=q.limit, points=pts, full_output=1
        )
    ier = 0 if not rest else 1
    tol = max(q.atol, q.rtol * abs(val))
    if not np.isfinite(val) or (ier and err > 10 * tol):
        raise NumericalFailureError(
            f"quadrature for {what} did not converge",
            {"interval": (a, b), "value": val, "abserr": err, "neval": info.get("neval"),
             "message": rest[0] if rest else ""},
        )
    return val


# ---------------------------------------------------------------------------
# signal power
# ---------------------------------------------------------------------------


def mean_signal(p: AnalyticParams) -> float:
    """``E[S]``: mean MRT signal power (Campbell's formula, closed form)."""
    a, d0, C = p.alpha, p.d0, p.C
    inner = min(C, d0)
    val = d0**-a * inner**2 / 2.0
    if C > d0:
        val += (d0 ** (2 - a) - C ** (2 - a)) / (a - 2)
    return 2.0 * np.pi * p.lambda_r * val


def _signal_exponent_scalar(t: float, p: AnalyticParams, q: QuadratureSpec) -> float:
    if t == 0 or p.C == 0 or p.lambda_r == 0:
        return 0.0
    a, d0, C = p.alpha, p.d0, p.C
    l0 = d0**-a
    inner = min(C, d0)
    val = t * l0 / (1.0 + t * l0) * inner**2 / 2.0
    if C > d0:
        # integrand t r / (r^a + t) turns over at r = t^(1/a)
        knee = t ** (1.0 / a)
        val += _quad(lambda r: t * r / (r**a + t), d0, C, q, "signal Laplace transform",
                     points=[knee])
    return 2.0 * np.pi * p.lambda_r * val


def _signal_exponent(t, p, q):
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise InvalidParameterError("t must be non-negative")
    if t_arr.ndim == 0:
        return _signal_exponent_scalar(float(t_arr), p, q)
    return np.array([_signal_exponent_scalar(float(x), p, q) for x in t_arr.ravel()]).reshape(
        t_arr.shape
    )


def laplace_S(t, p: AnalyticParams, q: QuadratureSpec = DEFAULT_QUADRATURE):
    """Laplace transform ``E[exp(-t S)]`` of the MRT signal power."""
    return np.exp(-_signal_exponent(t, p, q))


def signal_deficit(t, p: AnalyticParams, q: QuadratureSpec = DEFAULT_QUADRATURE):
    """``1 - L_S(t)`` computed without cancellation."""
    return -np.expm1(-_signal_exponent(t, p, q))


# ---------------------------------------------------------------------------
# MRT power-weight moment
# ---------------------------------------------------------------------------


def weight_moment(r: float, p: AnalyticParams, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Mean MRT power weight of a RAP at distance ``r`` from its user.

    Evaluates ``int_0^inf (1+t)^-2 L_S(t / l(r)) dt``; with
    ``t = u/(1-u)`` the kernel ``(1+t)^-2 dt`` becomes ``du`` on [0, 1).
    """
    if not 0 <= r <= p.C:
        raise InvalidParameterError(f"r must lie in [0, C={p.C}], got {r}")
    lr = path_loss(r, p.path_loss)
    es = mean_signal(p)
    if es == 0:
        return 1.0

    def f(u):
        return laplace_S(u / ((1.0 - u) * lr), p, q)

    # L_S starts to fall once t / l(r) ~ 1 / E[S]
    t_star = lr / es
    u_star = t_star / (1.0 + t_star)
    return float(min(max(_quad(f, 0.0, 1.0, q, "weight moment", points=[u_star]), 0.0), 1.0))


@dataclass(frozen=True)
class WeightMomentTable:
    """Tabulated ``W(r)`` on ``[0, C]``.

    Nodes are ``0`` plus a geometric grid on ``[d0, C]``; ``W`` is
    constant on ``[0, d0]`` because the path loss is. Between nodes the
    table interpolates with a monotone cubic (PCHIP) in ``log r``, which
    cannot overshoot and so keeps ``W`` non-increasing.
    """

    r: np.ndarray
    values: np.ndarray
    d0: float
    C: float

    @cached_property
    def _interp(self):
        if len(self.r) < 3:
            return None
        return PchipInterpolator(np.log(self.r[1:]), self.values[1:], extrapolate=False)

    def __call__(self, r):
        r_arr = np.asarray(r, dtype=float)
        out = np.full(r_arr.shape, self.values[0])
        if self._interp is not None:
            inside = r_arr > self.r[1]
            out[inside] = self._interp(np.log(np.minimum(r_arr[inside], self.C)))
        return out if out.ndim else float(out)


def _geometric_nodes(d0, C, n):
    nodes = np.exp(np.linspace(np.log(d0), np.log(C), n))
    nodes[0], nodes[-1] = d0, C
    return nodes


def build_weight_table(
    p: AnalyticParams, q: QuadratureSpec = DEFAULT_QUADRATURE, n_grid: int = 17, max_nodes: int = 2049
) -> WeightMomentTable:
    """Tabulate ``W(r)`` and refine until interpolation error < ``q.table_tol``.

    Each refinement halves the log-spacing; the new nodes are exactly the
    midpoints used to check the previous grid, so no evaluation is wasted.
    """
    if n_grid < 8:
        raise InvalidParameterError("n_grid must be >= 8")
    d0, C = p.d0, p.C
    w0 = weight_moment(0.0, p, q)
    if C <= d0:
        r = np.linspace(0.0, C, n_grid)
        return WeightMomentTable(r, np.full(n_grid, w0), d0, C)

    nodes = _geometric_nodes(d0, C, n_grid - 1)
    vals = np.array([weight_moment(x, p, q) for x in nodes])
    while True:
        table = WeightMomentTable(np.r_[0.0, nodes], np.r_[w0, vals], d0, C)
        mids = np.sqrt(nodes[1:] * nodes[:-1])
        mid_vals = np.array([weight_moment(x, p, q) for x in mids])
        err = np.max(np.abs(table(mids) - mid_vals))
        merged_r = np.empty(2 * len(nodes) - 1)
        merged_r[0::2], merged_r[1::2] = nodes, mids
        merged_v = np.empty_like(merged_r)
        merged_v[0::2], merged_v[1::2] = vals, mid_vals
        nodes, vals = merged_r, merged_v
        if err <= q.table_tol or len(nodes) >= max_nodes:
            break
    # monotone by construction of W; clip quadrature noise so PCHIP stays monotone
    vals = np.minimum.accumulate(np.minimum(vals, w0))
    return WeightMomentTable(np.r_[0.0, nodes], np.r_[w0, vals], d0, C)


# ---------------------------------------------------------------------------
# interference
# ---------------------------------------------------------------------------


def _gauss(a, b, n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


class _DiscRule:
    """Tensor Gauss-Legendre rule over a RAP disc of radius ``C``.

    Holds radial nodes with the weight ``W(r) r dr`` folded in, and
    angular nodes on ``[0, pi]`` (the integrand is even in the angle).
    """

    def __init__(self, p: AnalyticParams, q: QuadratureSpec, table: WeightMomentTable):
        C, d0 = p.C, p.d0
        if C > d0:
            r1, w1 = _gauss(0.0, d0, max(q.n_radial // 4, 4))
            y, wy = _gauss(np.log(d0), np.log(C), q.n_radial)
            r2 = np.exp(y)
            r = np.r_[r1, r2]
            w = np.r_[w1 * r1, wy * r2 * r2]
        else:
            r, w = _gauss(0.0, C, q.n_radial)
            w = w * r
        self.r = r
        self.rw = w
        self.W = np.asarray(table(r))
        self.theta, self.tw = _gauss(0.0, np.pi, q.n_angular)
        self.cos = np.cos(self.theta)
        self.p = p

    def exponent(self, t, rho):
        """``lambda_r * int int t l' W / (1 + t l' W) r dr dtheta`` for scalar ``rho``."""
        r = self.r[:, None]
        dist = np.sqrt(np.maximum(rho * rho + r * r - 2.0 * r * rho * self.cos[None, :], 0.0))
        x = path_loss(dist, self.p.path_loss) * self.W[:, None]
        t_arr = np.asarray(t, dtype=float)
        tx = np.multiply.outer(t_arr, x)
        inner = (tx / (1.0 + tx)) @ self.tw
        return 2.0 * self.p.lambda_r * (inner @ self.rw)


def laplace_I_rho(t, rho: float, p: AnalyticParams, q: QuadratureSpec = DEFAULT_QUADRATURE,
                  table: WeightMomentTable | None = None):
    """Laplace transform of the interference from one virtual cell whose user is at distance ``rho``."""
    if rho < p.D:
        raise InvalidParameterError(f"rho must be >= D={p.D}, got {rho}")
    if np.any(np.asarray(t) < 0):
        raise InvalidParameterError("t must be non-negative")
    if p.C == 0 or p.lambda_r == 0:
        return np.ones_like(np.asarray(t, dtype=float)) + 0.0
    if table is None:
        table = build_weight_table(p, q)
    return np.exp(-_DiscRule(p, q, table).exponent(t, rho))


def laplace_I_rho_far(t, rho: float, p: AnalyticParams):
    """Single-transmitter approximation of :func:`laplace_I_rho` for distant cells."""
    if rho < p.d0:
        raise InvalidParameterError(f"rho must be >= d0={p.d0}, got {rho}")
    e = p.empty_cell_probability
    return e + (1.0 - e) / (1.0 + np.asarray(t, dtype=float) * rho ** -p.alpha)


def far_tail_integral(t: float, d: float, alpha: float, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """``int_d^inf t rho / (rho^alpha + t) drho``.

    Integrated in ``log rho`` up to a truncation radius ``R`` beyond which
    the analytic bound ``t R^(2-alpha) / (alpha-2)`` is below
    ``q.rtol`` times the truncated integral; the bound is then added.
    """
    if alpha <= 2:
        raise DivergentInterferenceError(
            f"alpha={alpha} <= 2: interference aggregated over the infinite plane is unbounded"
        )
    if t == 0:
        return 0.0
    # past the knee rho = t^(1/alpha) the integrand decays as rho^(1-alpha)
    knee = max(d, t ** (1.0 / alpha))
    R = knee * (0.25 * q.rtol) ** (-1.0 / (alpha - 2.0))

    def f(y):
        rho = np.exp(y)
        return t * rho * rho / (rho**alpha + t)

    body = _quad(f, np.log(d), np.log(R), q, "far-field tail", points=[np.log(knee)])
    tail = t * R ** (2.0 - alpha) / (alpha - 2.0)
    if tail > q.rtol * max(body, q.atol):
        raise NumericalFailureError("far-field tail bound above tolerance",
                                    {"R": R, "tail": tail, "body": body})
    return body + tail


def _near_field_integral(t, p, q, rule, d):
    """``int_D^d [1 - L_I(rho, t)] rho drho`` in ``log rho``."""
    if d <= p.D:
        return 0.0

    def f(y):
        rho = np.exp(y)
        return -np.expm1(-rule.exponent(t, rho)) * rho * rho

    return _quad(f, np.log(p.D), np.log(d), q, "near-field interference")


def laplace_J(t, p: AnalyticParams, q: QuadratureSpec = DEFAULT_QUADRATURE,
              table: WeightMomentTable | None = None, split: float | None = None):
    """Laplace transform of the aggregate interference at the typical user.

    Cells of users within ``split`` (default ``p.near_far_split``) use the
    exact RAP-disc form; farther ones the single-transmitter form.
    """
    d = p.near_far_split if split is None else split
    if d < p.D:
        raise InvalidParameterError(f"split distance {d} below D={p.D}")
    if p.alpha <= 2:
        raise DivergentInterferenceError("alpha must exceed 2")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise InvalidParameterError("t must be non-negative")
    if p.lambda_u == 0 or p.C == 0 or p.lambda_r == 0:
        return np.ones_like(t_arr) if t_arr.ndim else 1.0
    rule = None
    if d > p.D:
        if table is None:
            table = build_weight_table(p, q)
        rule = _DiscRule(p, q, table)
    scale = 2.0 * np.pi * p.user_density
    nonempty = 1.0 - p.empty_cell_probability

    def one(tt):
        if tt == 0:
            return 1.0
        near = _near_field_integral(tt, p, q, rule, d) if rule is not None else 0.0
        far = nonempty * far_tail_integral(tt, d, p.alpha, q)
        return float(np.exp(-scale * (near + far)))

    if t_arr.ndim == 0:
        return one(float(t_arr))
    return np.array([one(float(x)) for x in t_arr.ravel()]).reshape(t_arr.shape)


# ---------------------------------------------------------------------------
# throughput
# ---------------------------------------------------------------------------


def tau_from_laplace(laplace_J_fn, deficit_fn, mean_S, noise_over_power, bandwidth,
                     q: QuadratureSpec = DEFAULT_QUADRATURE, t_lo=None, t_hi=None, points=()):
    """``B/ln2 * int_0^inf exp(-t N) L_J(t) (1 - L_S(t)) / t dt`` from callables.

    Parameters
    ----------
    laplace_J_fn : callable
        ``t -> L_J(t)`` for scalar ``t``.
    deficit_fn : callable
        ``t -> 1 - L_S(t)`` for scalar ``t``.
    mean_S : float
        ``E[S]``; on ``[0, t_lo]`` the integrand is replaced by this limit.
    t_lo, t_hi : float, optional
        Inner/outer limits of the log-spaced quadrature. ``t_hi`` defaults
        to ``q.noise_cutoff / noise_over_power``.
    points : iterable of float
        Values of ``t`` where the integrand changes character, given to
        the adaptive rule as breakpoints.
    """
    if mean_S == 0:
        return 0.0
    if t_lo is None:
        t_lo = q.series_eps / mean_S
    if t_hi is None:
        if noise_over_power <= 0:
            raise InvalidParameterError("noise-free throughput needs an explicit t_hi")
        t_hi = q.noise_cutoff / noise_over_power
    if t_hi <= t_lo:
        raise InvalidParameterError("t_hi must exceed t_lo")

    def f(x):
        t = np.exp(x)
        return np.exp(-t * noise_over_power) * laplace_J_fn(t) * deficit_fn(t)

    xp = [np.log(x) for x in points if t_lo < x < t_hi]
    body = _quad(f, np.log(t_lo), np.log(t_hi), q, "throughput", points=xp)
    head = mean_S * t_lo
    return float(bandwidth / np.log(2.0) * (head + body))


def _tau(p, q, table, split):
    es = mean_signal(p)
    if es == 0:
        return 0.0
    if table is None and split > p.D and p.lambda_u > 0:
        table = build_weight_table(p, q)
    t_lo = q.series_eps / p.path_loss.peak_gain
    pts = [1.0 / es]
    if p.noise_over_power > 0:
        pts.append(1.0 / p.noise_over_power)
    return tau_from_laplace(
        lambda t: laplace_J(t, p, q, table, split),
        lambda t: signal_deficit(t, p, q),
        es,
        p.noise_over_power,
        p.bandwidth,
        q,
        t_lo=t_lo,
        points=pts,
    )


def tau_analytic(p: AnalyticParams, q: QuadratureSpec = DEFAULT_QUADRATURE,
                 table: WeightMomentTable | None = None) -> float:
    """Average typical-user throughput (bit/s) with the near/far split."""
    return _tau(p, q, table, p.near_far_split)


def tau_farfield_only(p: AnalyticParams, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Throughput with every interfering cell treated as a single transmitter."""
    return _tau(p, q, None, p.D)


def eta_analytic(p: AnalyticParams, D_grid, q: QuadratureSpec = DEFAULT_QUADRATURE,
                 cell_ratio: float | None = 0.5):
    """Spatial throughput ``lambda_u p_r(D) tau(D)`` (bit/s/m^2) over ``D_grid``.

    With ``cell_ratio`` set, ``C = cell_ratio * D`` at every grid point.
    The near/far split is re-derived per point unless ``p.split`` is set.
    """
    D_grid = np.asarray(D_grid, dtype=float)
    if D_grid.size == 0:
        raise InvalidParameterError("D grid must be non-empty")
    out = []
    for D in D_grid:
        pp = p.replace(D=float(D))
        if cell_ratio is not None:
            pp = pp.replace(C=float(cell_ratio * D))
        if pp.split is not None and pp.split < pp.D:
            pp = pp.replace(split=None)
        out.append((float(D), pp.user_density * tau_analytic(pp, q)))
    return out
