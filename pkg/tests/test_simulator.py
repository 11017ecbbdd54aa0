import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import trapezoid

from virtualcell import NetworkConfig, PathLossModel
from virtualcell.analytic import AnalyticParams, mean_signal
from virtualcell.channel import path_loss
from virtualcell.errors import InvalidParameterError
from virtualcell.schemes import SCHEMES, CellChannelState, assign
from virtualcell.simulator import (
    SinrSamples,
    ThroughputEstimate,
    _DropLayout,
    _evaluate,
    drop_rng,
    empirical_laplace,
    empirical_weight_moment,
    estimate_eta,
    estimate_tau,
    estimate_tau_schemes,
    run_drop,
    run_drop_schemes,
    sample_typical_signal,
)

SMALL = NetworkConfig(window_width=2000.0, window_height=2000.0)


def test_empirical_laplace_basics():
    x = np.array([0.0, 1.0, 2.0])
    assert empirical_laplace(x, 0.0) == pytest.approx(1.0)
    np.testing.assert_allclose(empirical_laplace(x, [0.0, 1.0]), [1.0, (1 + np.exp(-1) + np.exp(-2)) / 3])
    with pytest.raises(InvalidParameterError):
        empirical_laplace(x, -1.0)


def test_empirical_laplace_exponential():
    x = np.random.default_rng(0).standard_exponential(200_000)
    t = np.array([0.1, 1.0, 10.0])
    m, se = empirical_laplace(x, t, return_stderr=True)
    assert np.all(np.abs(m - 1 / (1 + t)) < 4 * se)


def test_single_link_throughput():
    # SINR of 2^x - 1 gives x bit/s/Hz
    s = SinrSamples([3.0], [0.0], 1.0)
    assert s.throughput(1.0)[0] == pytest.approx(2.0)
    cfg = NetworkConfig()
    snr = cfg.path_loss(50.0) / cfg.noise_over_power
    rate = SinrSamples([cfg.path_loss(50.0)], [0.0], cfg.noise_over_power).throughput(cfg.bandwidth)[0]
    assert rate == pytest.approx(cfg.bandwidth * np.log2(1 + snr), rel=1e-12)


@given(st.floats(0.0, 1e3), st.floats(0.0, 1e3))
def test_sinr_decreasing_in_interference(J, extra):
    a = SinrSamples([1.0], [J], 0.1).sinr[0]
    b = SinrSamples([1.0], [J + extra], 0.1).sinr[0]
    assert b <= a


def test_sinr_samples_validation():
    with pytest.raises(InvalidParameterError):
        SinrSamples([1.0, 2.0], [0.0], 1.0)
    with pytest.raises(InvalidParameterError):
        SinrSamples([-1.0], [0.0], 1.0)


def test_no_contenders_means_no_interference():
    cfg = SMALL.replace(lambda_u=0.0)
    res = run_drop_schemes(cfg, SCHEMES, np.random.default_rng(1), 10)
    for s in SCHEMES:
        assert np.all(res[s].J == 0.0)


def test_zero_cell_radius_means_no_signal():
    cfg = SMALL.replace(cell_radius=0.0)
    res = run_drop_schemes(cfg, SCHEMES, np.random.default_rng(1), 10)
    for s in SCHEMES:
        assert np.all(res[s].S == 0.0) and np.all(res[s].J == 0.0)


def test_fadings_per_drop_validated():
    with pytest.raises(InvalidParameterError):
        run_drop(SMALL, "mrt", np.random.default_rng(0), 0)


def test_reproducible_across_workers():
    a = estimate_tau_schemes(SMALL, ["mrt", "ncjt"], 8, 5, seed=3, workers=1)
    b = estimate_tau_schemes(SMALL, ["mrt", "ncjt"], 8, 5, seed=3, workers=2)
    for s in a:
        assert a[s] == b[s]
    c = estimate_tau(SMALL, "mrt", 8, 5, seed=4)
    assert c.mean != a["mrt"].mean


def test_drop_rng_streams_differ():
    assert drop_rng(1, 0).random() != drop_rng(1, 1).random()
    assert drop_rng(1, 5).random() == drop_rng(1, 5).random()


def test_mean_signal_matches_campbell():
    # the typical user's MRT signal averages to lambda_r int l(r) 2 pi r dr
    cfg = SMALL
    rng = np.random.default_rng(5)
    means = []
    for _ in range(3000):
        means.append(run_drop(cfg, "mrt", rng, 4).S.mean())
    means = np.asarray(means)
    expected = mean_signal(AnalyticParams.from_config(cfg))
    r = np.linspace(0.0, cfg.cell_radius, 200_001)
    quad = cfg.lambda_r * trapezoid(path_loss(r, cfg.path_loss) * 2 * np.pi * r, r)
    assert expected == pytest.approx(quad, rel=1e-4)
    se = means.std(ddof=1) / np.sqrt(len(means))
    assert abs(means.mean() - expected) < 3 * se


def test_evaluate_wiring_matches_per_cell_assignment():
    cfg = NetworkConfig(path_loss=PathLossModel(d0=10.0, alpha=4.0), lambda_u=1e-5)
    # active RAPs 0..3; typical cell uses RAPs 0 and 1, two foreign cells
    lay = _DropLayout(
        n_active=4,
        typ_dist=np.array([20.0, 80.0]),
        typ_pos=np.array([0, 1]),
        own_dist=np.array([[30.0, 60.0], [50.0, 0.0]]),
        cross_dist=np.array([[500.0, 600.0], [700.0, 0.0]]),
        mask=np.array([[True, True], [True, False]]),
        pos=np.array([[2, 1], [3, 0]]),
    )
    rng = np.random.default_rng(0)
    F = 3
    g0 = rng.standard_exponential((F, 4))
    th = rng.uniform(0, 2 * np.pi, (F, 4))
    g_own = rng.standard_exponential((F, 2, 2))
    out = _evaluate(lay, cfg, SCHEMES, g0, th, g_own)
    pl = cfg.path_loss
    for s in SCHEMES:
        for f in range(F):
            typ = CellChannelState.from_links(lay.typ_dist, g0[f, :2], th[f, :2], pl)
            assert out[s].S[f] == pytest.approx(assign(s, typ).signal_power, rel=1e-12)
            J = 0.0
            for k, n in enumerate([2, 1]):
                own = CellChannelState.from_links(lay.own_dist[k, :n], g_own[f, k, :n], np.zeros(n), pl)
                w = assign(s, own).weights
                links = path_loss(lay.cross_dist[k, :n], pl) * g0[f, lay.pos[k, :n]]
                J += np.sum(w * links)
            assert out[s].J[f] == pytest.approx(J, rel=1e-12)


def test_weight_moment_oracle():
    cfg = NetworkConfig()
    lone = empirical_weight_moment(cfg.replace(lambda_r=0.0), 50.0, 100, seed=0)
    assert lone.mean == 1.0
    near = empirical_weight_moment(cfg, 25.0, 20_000, seed=1)
    far = empirical_weight_moment(cfg, 200.0, 20_000, seed=2)
    assert near.mean > far.mean
    with pytest.raises(InvalidParameterError):
        empirical_weight_moment(cfg, 201.0, 10, seed=0)


def test_sample_typical_signal_mean():
    cfg = NetworkConfig()
    S = sample_typical_signal(cfg, 200_000, np.random.default_rng(3))
    se = S.std(ddof=1) / np.sqrt(len(S))
    assert abs(S.mean() - mean_signal(AnalyticParams.from_config(cfg))) < 3 * se
    # empty cells appear with probability exp(-lambda_r pi C^2)
    p0 = np.exp(-cfg.lambda_r * np.pi * cfg.cell_radius**2)
    assert abs(np.mean(S == 0) - p0) < 4 * np.sqrt(p0 * (1 - p0) / len(S))


@pytest.mark.parametrize("scheme", ["ncjt", "maxsnr", "nearest"])
def test_sample_typical_signal_other_schemes(scheme):
    cfg = NetworkConfig()
    rng = np.random.default_rng(4)
    S = sample_typical_signal(cfg, 2000, rng, scheme)
    assert S.shape == (2000,) and np.all(S >= 0)


def test_from_drops_clustered_variance():
    means = np.array([1.0, 2.0, 3.0, 4.0])
    est = ThroughputEstimate.from_drops(means, np.full(4, 0.5), 10, 1.0)
    assert est.mean == 2.5
    assert est.stderr == pytest.approx(np.sqrt(means.var(ddof=1) / 4))
    assert est.n_samples == 40
    assert est.within_drop_var == 0.5
    lo, hi = est.ci95
    assert lo < 2.5 < hi
    with pytest.raises(InvalidParameterError):
        ThroughputEstimate.from_drops([], [], 10, 1.0)
    single = ThroughputEstimate.from_drops([1.0], [4.0], 16, 1.0)
    assert single.stderr == pytest.approx(0.5)


def test_estimate_eta_units_and_ratio():
    cfg = NetworkConfig(window_width=3000.0, window_height=3000.0)
    pts = estimate_eta(cfg, "mrt", [200.0, 400.0], 4, 4, seed=1)
    assert [p.D for p in pts] == [200.0, 400.0]
    for p in pts:
        assert p.eta > 0
        # eta = lambda_u p_r tau, so eta / tau is at most lambda_u
        assert p.eta / p.tau.mean <= cfg.lambda_u
    with pytest.raises(InvalidParameterError):
        estimate_eta(cfg, "mrt", [], 1, 1, seed=0)
