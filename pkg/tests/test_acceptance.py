"""Acceptance criteria, each at its stated tolerance.

Every test appends one ``PASS``/``FAIL`` line to the acceptance summary
(printed at the end of the pytest run) before asserting, so the summary
is complete even when a criterion fails.
"""

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from virtualcell import NetworkConfig, km, per_km2
from virtualcell.analytic import (
    AnalyticParams,
    QuadratureSpec,
    build_weight_table,
    eta_analytic,
    laplace_S,
    tau_analytic,
    tau_farfield_only,
    tau_from_laplace,
    weight_moment,
)
from virtualcell.geometry import Window, matern_hardcore_thinning, sample_ppp, scheduling_probability
from virtualcell.schemes import signal_power
from virtualcell.simulator import (
    SinrSamples,
    empirical_laplace,
    empirical_weight_moment,
    estimate_tau_schemes,
    sample_typical_signal,
)

C_GRID_KM = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)
MC_DROPS, MC_FADINGS = 2000, 50


def record(number, title, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} | {detail}")
    return ok


@pytest.fixture(scope="module")
def mc_schemes(cfg):
    return estimate_tau_schemes(cfg, ["mrt", "maxsnr", "nearest", "ncjt"], MC_DROPS, MC_FADINGS, seed=2017)


@pytest.fixture(scope="module")
def c_sweep(params):
    rows = []
    for c in C_GRID_KM:
        p = params.replace(C=km(c))
        rows.append((tau_analytic(p), tau_farfield_only(p)))
    return np.array(rows)


def test_c01_cross_engine_agreement(params, table, mc_schemes):
    mc = mc_schemes["mrt"]
    an = tau_analytic(params, table=table)
    rel = abs(an - mc.mean) / mc.mean
    ok = record(1, "analytic vs Monte Carlo tau at baseline", rel <= 0.07,
                f"analytic {an / 1e6:.3f} Mbit/s, MC {mc.mean / 1e6:.3f} +/- {mc.ci95_halfwidth / 1e6:.3f} "
                f"Mbit/s ({MC_DROPS} drops x {MC_FADINGS} fadings), rel. diff {rel:.2%} (limit 7%)")
    assert ok


def test_c02_farfield_upper_bound(c_sweep):
    exact, far = c_sweep.T
    gap = far - exact
    ok = bool(np.all(far >= exact) and np.all(np.diff(gap) >= 0))
    record(2, "far-field-only tau bounds tau from above, gap non-decreasing in C", ok,
           "gap [Mbit/s] " + " ".join(f"{g / 1e6:.3f}" for g in gap))
    assert ok


def test_c03_saturation(c_sweep):
    tau = c_sweep[:, 0]
    inc = np.diff(tau)
    ok = bool(np.all(inc > 0) and inc[-1] < inc[0])
    record(3, "tau increasing in C with diminishing increments", ok,
           "tau [Mbit/s] " + " ".join(f"{t / 1e6:.3f}" for t in tau)
           + f", first step {inc[0] / 1e6:.3f}, last step {inc[-1] / 1e6:.3f}")
    assert ok


def test_c04_scheme_ordering(mc_schemes):
    order = ["mrt", "maxsnr", "nearest", "ncjt"]
    lo_hi = [mc_schemes[s].ci95 for s in order]
    ok = all(lo_hi[i][0] > lo_hi[i + 1][1] for i in range(3))
    record(4, "MRT > max-SNR > nearest > NCJT with disjoint 95% CIs", ok,
           ", ".join(f"{s} {mc_schemes[s].mean / 1e6:.2f}+/-{mc_schemes[s].ci95_halfwidth / 1e6:.2f}"
                     for s in order) + " Mbit/s")
    assert ok


def test_c05_spatial_throughput_tradeoff(params):
    D = np.round(np.arange(1, 11) * 0.1, 1)
    eta = np.array([e for _, e in eta_analytic(params, km(D))]) * 1e6  # bit/s/km^2
    k = int(np.argmax(eta))
    interior = 0 < k < len(D) - 1
    ends_low = eta[0] < 0.8 * eta[k] and eta[-1] < 0.8 * eta[k]
    ok = interior and ends_low
    record(5, "eta(D) has an interior maximum on D = 0.1..1.0 km, endpoints < 80% of it", ok,
           f"argmax D={D[k]} km, eta [Mbit/s/km^2] "
           + " ".join(f"{e / 1e6:.1f}" for e in eta))
    assert ok


def test_c06_weight_moment_oracle(cfg, params):
    results = []
    for i, r in enumerate((25.0, 100.0, 190.0)):
        est = empirical_weight_moment(cfg, r, 100_000, seed=600 + i)
        results.append((r, weight_moment(r, params), est))
    ok = all(est.within(w, 3.0) for _, w, est in results)
    record(6, "W(r) vs brute-force mean MRT weight within 3 SE", ok,
           ", ".join(f"r={r:g}: {w:.5f} vs {e.mean:.5f} ({abs(w - e.mean) / e.stderr:.2f} SE)"
                     for r, w, e in results))
    assert ok


def test_c07_signal_laplace_oracle(cfg, params):
    S = sample_typical_signal(cfg, 100_000, np.random.default_rng(700))
    t = np.logspace(3, 10, 10)
    emp, se = empirical_laplace(S, t, return_stderr=True)
    an = laplace_S(t, params)
    z = np.abs(an - emp) / se
    ok = bool(np.all(z <= 3.0))
    record(7, "L_S(t) vs empirical Laplace transform within 3 SE", ok,
           f"{len(t)} t values in [1e3, 1e10], max deviation {z.max():.2f} SE")
    assert ok


def test_c08_matern_retention():
    window = Window(10_000.0, 10_000.0)
    rng = np.random.default_rng(800)
    lam = per_km2(20)
    lines, ok = [], True
    for D_km in (0.4, 0.1):
        kept = total = 0
        while total < 100_000:
            cands = sample_ppp(lam, window, rng)
            kept += len(matern_hardcore_thinning(cands, km(D_km), rng))
            total += len(cands)
        freq, p = kept / total, scheduling_probability(lam, km(D_km))
        ok &= abs(freq - p) <= 0.01
        lines.append(f"D={D_km} km: {freq:.5f} vs {p:.5f} over {total} candidates")
    record(8, "Matern retention frequency vs scheduling probability within 1% abs.", ok,
           "; ".join(lines))
    assert ok


def test_c09_exact_dominance(cfg):
    rng = np.random.default_rng(900)
    n = 100_000
    counts = rng.poisson(cfg.lambda_r * np.pi * cfg.cell_radius**2, n) + 1
    M = counts.max()
    mask = np.arange(M) < counts[:, None]
    dist = cfg.cell_radius * np.sqrt(rng.uniform(size=(n, M)))
    gain = cfg.path_loss(dist) * rng.standard_exponential((n, M))
    phase = np.zeros((n, M))
    S = {s: signal_power(s, gain, phase, dist, mask) for s in ("mrt", "maxsnr", "nearest")}
    holds = (S["mrt"] >= S["maxsnr"]) & (S["maxsnr"] >= S["nearest"])
    ok = bool(holds.all())
    record(9, "S_MRT >= S_maxSNR >= S_nearest on every sampled cell", ok,
           f"{holds.sum()}/{n} non-empty cell states, up to {M} members")
    assert ok


def test_c10_throughput_integral_identity():
    rng = np.random.default_rng(1000)
    n = 1_000_000
    S = rng.exponential([1.0, 0.5, 2.0], size=(n, 3)).sum(axis=1)
    J = rng.exponential(1.5, n)
    c = 0.3
    mc = float(np.mean(np.log2(1.0 + S / (J + c))))
    lap_S, lap_J = S[:200_000], J[:200_000]

    def deficit(t):
        return float(np.mean(-np.expm1(-t * lap_S)))

    integral = tau_from_laplace(lambda t: float(empirical_laplace(lap_J, t)), deficit,
                                float(lap_S.mean()), c, 1.0)
    rel = abs(integral - mc) / mc
    ok = rel <= 0.02
    record(10, "integral form from empirical Laplace transforms vs direct mean", ok,
           f"{integral:.5f} vs {mc:.5f} bit/s/Hz, rel. diff {rel:.3%} (limit 2%)")
    assert ok


def test_c11_numerical_stability(params, table):
    base = tau_analytic(params, table=table)
    q2 = QuadratureSpec().tightened(0.5)
    fine = tau_analytic(params, q2, build_weight_table(params, q2, n_grid=2 * 17 - 1))
    rel = abs(fine - base) / base
    ok = rel < 0.005
    record(11, "tau stable under halved tolerances and doubled table grid", ok,
           f"{base / 1e6:.6f} -> {fine / 1e6:.6f} Mbit/s, rel. change {rel:.2e} (limit 0.5%)")
    assert ok
