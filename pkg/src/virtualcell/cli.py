"""Command-line sweeps over cell size ``C`` or exclusion radius ``D``.

Examples::

    virtualcell --preset fig2 --out fig2.csv
    virtualcell --preset fig3 --drops 1000 --fadings 100
    virtualcell --mode analytic --sweep D --grid 0.1:1.0:0.1 C_over_D=0.5
    virtualcell --config fig2.csv          # re-run from a CSV header

Physical parameters are given as ``key=value`` overrides in human units
(km, km^-2, dBm, MHz). Output is CSV whose ``#`` header records the full
resolved configuration, so feeding a result file back through
``--config`` repeats the run exactly.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import logging
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .analytic import AnalyticParams, QuadratureSpec, tau_analytic, tau_farfield_only
from .channel import PathLossModel
from .config import NetworkConfig, km, per_km2
from .errors import InvalidParameterError, NumericalFailureError
from .geometry import scheduling_probability
from .schemes import SCHEMES, canonical_scheme
from .simulator import estimate_tau_schemes

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
MODES = ("analytic", "montecarlo", "compare")


class ConfigError(InvalidParameterError):
    pass


@dataclass
class ExperimentConfig:
    """A sweep, in the units it is written in."""

    lambda_r_km2: float = 50.0
    lambda_u_km2: float = 20.0
    C_km: float = 0.2
    D_km: float = 0.4
    alpha: float = 3.6
    d0_m: float = 10.0
    bandwidth_MHz: float = 10.0
    noise_psd_dbm_hz: float = -174.0
    power_dbm: float = 24.0
    window_km: float = 10.0
    metric: str = "toroidal"
    mode: str = "compare"
    schemes: tuple = ("mrt",)
    sweep: str = "C"
    grid: tuple = (0.2,)
    C_over_D: float | None = None
    seed: int = 2017
    drops: int = 200
    fadings: int = 20
    rtol: float = 1e-6
    atol: float = 1e-12
    split_d_km: float | None = None

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.sweep not in ("C", "D"):
            raise ConfigError(f"sweep must be C or D, got {self.sweep!r}")
        if not self.schemes:
            raise ConfigError("at least one scheme is required")
        self.schemes = tuple(canonical_scheme(s) for s in self.schemes)
        if self.mode == "analytic" and self.schemes != ("mrt",):
            raise ConfigError("the analytic engine only covers the mrt scheme")
        g = np.asarray(self.grid, dtype=float)
        if g.size == 0 or np.any(~np.isfinite(g)) or np.any(g < 0):
            raise ConfigError("grid must be non-empty, finite and non-negative")
        if np.any(np.diff(g) <= 0):
            raise ConfigError("grid must be strictly increasing")
        if self.C_over_D is not None and self.sweep != "D":
            raise ConfigError("C_over_D only applies to a D sweep")
        if self.drops < 1 or self.fadings < 1:
            raise ConfigError("drops and fadings must be >= 1")
        if not self.alpha > 2:
            raise ConfigError(
                f"alpha={self.alpha} rejected: alpha must exceed 2, otherwise the "
                "interference summed over the infinite plane diverges"
            )
        for name in ("lambda_r_km2", "lambda_u_km2", "C_km", "D_km"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.d0_m <= 0 or self.bandwidth_MHz <= 0 or self.window_km <= 0:
            raise ConfigError("d0_m, bandwidth_MHz and window_km must be positive")
        return self

    # -- conversion to engine inputs -------------------------------------

    def network(self, C_km=None, D_km=None) -> NetworkConfig:
        try:
            return NetworkConfig(
                lambda_r=per_km2(self.lambda_r_km2),
                lambda_u=per_km2(self.lambda_u_km2),
                cell_radius=km(self.C_km if C_km is None else C_km),
                min_separation=km(self.D_km if D_km is None else D_km),
                path_loss=PathLossModel(self.d0_m, self.alpha),
                bandwidth=self.bandwidth_MHz * 1e6,
                noise_psd_dbm_hz=self.noise_psd_dbm_hz,
                tx_power_dbm=self.power_dbm,
                window_width=km(self.window_km),
                window_height=km(self.window_km),
                metric=self.metric,
            )
        except InvalidParameterError as exc:
            raise ConfigError(str(exc)) from exc

    def quadrature(self) -> QuadratureSpec:
        return QuadratureSpec(rtol=self.rtol, atol=self.atol)

    def points(self):
        """``(C_km, D_km)`` for every grid value."""
        for v in self.grid:
            if self.sweep == "C":
                yield v, v, self.D_km
            elif self.C_over_D is not None:
                yield v, self.C_over_D * v, v
            else:
                yield v, self.C_km, v

    def header_items(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(float(x)) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                v = repr(float(v))
            yield f.name, "" if v is None else str(v)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _grid_values(text: str):
    text = text.strip()
    if ":" in text:
        try:
            start, stop, step = (float(x) for x in text.split(":"))
        except ValueError:
            raise ConfigError(f"bad grid range {text!r}, expected start:stop:step") from None
        if step <= 0:
            raise ConfigError("grid step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(round(start + i * step, 12)) for i in range(n))
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"bad grid {text!r}") from None


def _coerce(key: str, value: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    value = value.strip()
    kind = _FIELD_TYPES[key]
    try:
        if key == "grid":
            return _grid_values(value)
        if key == "schemes":
            return tuple(s.strip() for s in value.split(",") if s.strip())
        if "None" in kind:
            return None if value in ("", "None", "none") else float(value)
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
        return value
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None


PRESETS = {
    "fig2": dict(mode="compare", sweep="C", schemes=("mrt",),
                 grid=(0.05, 0.10, 0.15, 0.20, 0.25, 0.30), D_km=0.4),
    "fig3": dict(mode="montecarlo", sweep="C", schemes=SCHEMES,
                 grid=(0.05, 0.10, 0.15, 0.20, 0.25, 0.30), D_km=0.4),
    "fig4": dict(mode="compare", sweep="D", schemes=("mrt",), C_over_D=0.5,
                 grid=tuple(round(0.1 * i, 1) for i in range(1, 11))),
}


def read_config_file(path: str) -> dict:
    """``key=value`` pairs from a file; a leading ``#`` is allowed.

    Lines without ``=`` are skipped, so a CSV written by this tool can
    be passed back in.
    """
    items = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            s = line.strip()
            if s.startswith("#"):
                s = s.lstrip("#").strip()
            if not s or "=" not in s:
                continue
            key, value = s.split("=", 1)
            items[key.strip()] = _coerce(key.strip(), value)
    return items


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="virtualcell",
        description="Throughput sweeps for user-centric joint transmission.",
    )
    ap.add_argument("overrides", nargs="*", metavar="KEY=VALUE",
                    help="parameter overrides, e.g. C_km=0.2 lambda_r_km2=50")
    ap.add_argument("--preset", choices=sorted(PRESETS))
    ap.add_argument("--config", help="key=value file or a previous output CSV")
    ap.add_argument("--mode", choices=MODES)
    ap.add_argument("--scheme", action="append",
                    help=f"one of {', '.join(SCHEMES)} or 'all'; repeatable")
    ap.add_argument("--sweep", choices=("C", "D"))
    ap.add_argument("--grid", help="comma list or start:stop:step, in km")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--drops", type=int)
    ap.add_argument("--fadings", type=int)
    ap.add_argument("--rtol", type=float)
    ap.add_argument("--atol", type=float)
    ap.add_argument("--split-d", type=float, dest="split_d_km", help="near/far split in km")
    ap.add_argument("--workers", type=int, default=1, help="processes for Monte Carlo drops")
    ap.add_argument("--out", help="output CSV path (default: stdout)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def parse_config(argv=None):
    """Resolve preset, config file, flags and overrides (in that order).

    Returns ``(ExperimentConfig, argparse.Namespace)``.
    """
    args = build_parser().parse_args(argv)
    values = {}
    if args.preset:
        values.update(PRESETS[args.preset])
    if args.config:
        try:
            values.update(read_config_file(args.config))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    for name in ("mode", "sweep", "seed", "drops", "fadings", "rtol", "atol", "split_d_km"):
        v = getattr(args, name)
        if v is not None:
            values[name] = v
    if args.grid is not None:
        values["grid"] = _grid_values(args.grid)
    if args.scheme:
        names = []
        for s in args.scheme:
            names.extend(SCHEMES if s == "all" else s.split(","))
        values["schemes"] = tuple(names)
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        key, value = item.split("=", 1)
        values[key.strip()] = _coerce(key.strip(), value)
    unknown = set(values) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return ExperimentConfig(**values).validate(), args


def columns(cfg: ExperimentConfig):
    analytic = cfg.mode in ("analytic", "compare")
    mc = cfg.mode in ("montecarlo", "compare")
    cols = [f"{cfg.sweep}_km"]
    if cfg.sweep == "D":
        cols += ["eta_analytic"] * analytic + ["eta_mc", "eta_mc_ci95"] * mc
    cols += ["tau_analytic", "tau_farfield"] * analytic + ["tau_mc", "tau_mc_ci95"] * mc
    if cfg.sweep == "D":
        cols.append("C_km")
    else:
        cols.append("D_km")
    cols.append("scheme")
    return cols


def _grid_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1)[0])


def run_experiment(cfg: ExperimentConfig, workers: int = 1):
    """Evaluate every grid point; returns a list of row dicts in grid order.

    ``tau_*`` are bit/s and ``eta_*`` bit/s/km^2.
    """
    q = cfg.quadrature()
    rows = []
    for i, (v, C_km, D_km) in enumerate(cfg.points()):
        net = cfg.network(C_km=C_km, D_km=D_km)
        try:
            res = {s: {} for s in cfg.schemes}
            if cfg.mode in ("analytic", "compare") and "mrt" in cfg.schemes:
                split = None if cfg.split_d_km is None else max(km(cfg.split_d_km), net.min_separation)
                p = AnalyticParams.from_config(net, split=split)
                res["mrt"]["tau_analytic"] = tau_analytic(p, q)
                res["mrt"]["tau_farfield"] = tau_farfield_only(p, q)
            if cfg.mode in ("montecarlo", "compare"):
                est = estimate_tau_schemes(net, cfg.schemes, cfg.drops, cfg.fadings,
                                           _grid_seed(cfg.seed, i), workers)
                for s, e in est.items():
                    res[s]["tau_mc"] = e.mean
                    res[s]["tau_mc_ci95"] = e.ci95_halfwidth
        except NumericalFailureError as exc:
            raise NumericalFailureError(f"grid point {cfg.sweep}={v} km: {exc}", exc.diagnostics) from exc
        # scheduled users per km^2
        density = cfg.lambda_u_km2 * scheduling_probability(cfg.lambda_u_km2, D_km)
        for s in cfg.schemes:
            r = {f"{cfg.sweep}_km": v, "scheme": s}
            r["C_km" if cfg.sweep == "D" else "D_km"] = C_km if cfg.sweep == "D" else D_km
            r.update(res[s])
            if cfg.sweep == "D":
                if "tau_analytic" in r:
                    r["eta_analytic"] = density * r["tau_analytic"]
                if "tau_mc" in r:
                    r["eta_mc"] = density * r["tau_mc"]
                    r["eta_mc_ci95"] = density * r["tau_mc_ci95"]
            rows.append(r)
        log.info("grid point %s=%g km done", cfg.sweep, v)
    return rows


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(cfg: ExperimentConfig, rows, fh):
    fh.write(f"# virtualcell {__version__} experiment\n")
    for k, v in cfg.header_items():
        fh.write(f"# {k}={v}\n")
    fh.write("# units: tau in bit/s, eta in bit/s/km^2, lengths in km\n")
    cols = columns(cfg)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])


def main(argv=None) -> int:
    try:
        cfg, args = parse_config(argv)
    except InvalidParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rows = run_experiment(cfg, workers=args.workers)
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InvalidParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    buf = io.StringIO()
    write_csv(cfg, rows, buf)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
