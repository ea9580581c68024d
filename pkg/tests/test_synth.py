import math

import numpy as np
import pytest
from scipy import integrate, optimize, stats

from pitrecal import gpme
from pitrecal.archive import pit
from pitrecal.synth._seeding import stream
from pitrecal.synth.bma import bma_em_fit, bma_forecast
from pitrecal.synth.circuit import (ALPHA_GRID, Climatology, EnsembleForecastConfig,
                                    blend_ignorance, make_circuit_foa)
from pitrecal.synth.enso import EnsoConfig, enso_series, make_enso_like_foa
from pitrecal.synth.gaussian_pair import (GaussianPairScenario, gaussian_pair_foa,
                                          gaussian_pair_pit_cdf, gaussian_pair_pit_density)
from pitrecal.synth.moore_spiegel import (DivergenceError, MooreSpiegelState, derivatives,
                                          ms_ensemble, ms_step, ms_trajectory)
from pitrecal.thinning import autocorrelation, sample_acf, thin


# -- Moore-Spiegel ------------------------------------------------------------

def test_derivatives_at_unit_x():
    assert derivatives(MooreSpiegelState(1.0, 0.0, 0.0)) == pytest.approx((0.0, 6.4, 1.0))


def rk4_ratio(s0, dt=0.04, span=0.04 * 8):
    ref = ms_trajectory(s0, dt / 16, int(round(span / (dt / 16))))[-1]
    e1 = np.linalg.norm(ms_trajectory(s0, dt, int(round(span / dt)))[-1] - ref)
    e2 = np.linalg.norm(ms_trajectory(s0, dt / 2, int(round(2 * span / dt)))[-1] - ref)
    return e1 / e2


def test_rk4_fourth_order():
    s0 = MooreSpiegelState(0.3, -0.2, 0.1)
    assert 12 <= rk4_ratio(s0) <= 20


def test_step_matches_trajectory():
    s0 = MooreSpiegelState(0.1, 0.2, 0.3)
    s1 = ms_step(s0, 0.01)
    np.testing.assert_array_equal(s1.as_array(), ms_trajectory(s0, 0.01, 1)[1])
    np.testing.assert_array_equal(ms_ensemble(s0.as_array()[None], 10, 3.6, 0.01, 1)[0], s1.as_array())


@pytest.mark.slow
def test_long_trajectory_bounded():
    traj = ms_trajectory(MooreSpiegelState(0.1, 0.0, 0.0), 0.01, 1_000_000)
    assert np.all(np.abs(traj[:, 2]) < 1e3)
    assert traj[:, 2].std() > 0.1  # not collapsed onto a fixed point


def test_dt_and_divergence():
    with pytest.raises(ValueError):
        ms_trajectory(MooreSpiegelState(0, 0, 0), 0.06, 10)
    with pytest.raises(ValueError):
        ms_trajectory(MooreSpiegelState(0, 0, 0), 0.0, 10)
    with pytest.raises(DivergenceError) as info:
        ms_trajectory(MooreSpiegelState(1e3, 1e3, 1e3), 0.05, 1000)
    assert info.value.step >= 1


# -- circuit pipeline ---------------------------------------------------------

def test_climatology_and_blend_mass():
    z = stream(1, 0).standard_normal(3000)
    clim = Climatology.from_samples(z, 60)
    assert clim.weights.sum() == pytest.approx(1.0)
    members = stream(1, 1).standard_normal(15)
    for alpha in (0.0, 0.5, 1.0):
        w = np.concatenate([np.full(15, (1 - alpha) / 15), alpha * clim.weights])
        p = lambda x: (1 - alpha) * np.mean(stats.norm.pdf(x, members, 0.3)) + alpha * clim.pdf(x)
        mass = integrate.quad(p, -12, 12, points=[0.0], limit=400, epsabs=1e-12)[0]
        assert mass == pytest.approx(1.0, abs=1e-8)
        assert w.sum() == pytest.approx(1.0)


def test_blend_ignorance_limits():
    rng = stream(2, 0)
    members = rng.standard_normal((50, 20))
    obs = rng.standard_normal(50)
    clim = Climatology.from_samples(rng.standard_normal(500), 30)
    pure = blend_ignorance(members, obs, clim, 1.0, 1.0)
    assert pure == pytest.approx(-np.mean(np.log2(clim.pdf(obs))))
    assert ALPHA_GRID[0] == 0.0 and ALPHA_GRID[-1] == 1.0 and ALPHA_GRID.size == 21


@pytest.fixture(scope="module")
def perfect_run():
    cfg = EnsembleForecastConfig(model_R=10.0, perturbation_sd=1e-3, analysis_sd=1e-3,
                                 obs_noise_sd=0.0, ensemble_size=63, n_dressing=1024)
    return make_circuit_foa(cfg, 2000, seed=41, return_details=True)


@pytest.fixture(scope="module")
def imperfect_run():
    return make_circuit_foa(EnsembleForecastConfig(), 2048, seed=42, return_details=True)


def test_perfect_model_is_calibrated(perfect_run):
    f = pit(perfect_run.archive).values
    assert stats.kstest(f, "uniform").statistic < 0.05


def test_imperfect_model_is_miscalibrated(imperfect_run):
    f = pit(imperfect_run.archive).values
    counts = np.histogram(f, bins=20, range=(0, 1))[0]
    assert stats.chisquare(counts).pvalue < 1e-3
    assert len(imperfect_run.archive) == 2048
    for n in (200, 283, 400, 566, 800, 1131, 1600):
        train, test = imperfect_run.archive.split(n)
        assert len(train) == n and len(test) == 2048 - n


def test_dressing_fit_is_sane(imperfect_run):
    r = imperfect_run
    assert 0.0 <= r.alpha <= 1.0 and r.kernel_sd > 0
    assert math.isfinite(r.dressing_ignorance)
    f = r.archive[0].forecast
    assert f.weights.sum() == pytest.approx(1.0)


def test_circuit_determinism():
    cfg = EnsembleForecastConfig(ensemble_size=15, n_dressing=64, kernel_sd=0.05, alpha=0.1)
    a = make_circuit_foa(cfg, 30, seed=3)
    b = make_circuit_foa(cfg, 30, seed=3)
    assert [r.observation for r in a] == [r.observation for r in b]
    c = make_circuit_foa(cfg, 30, seed=4)
    assert [r.observation for r in a] != [r.observation for r in c]


def test_config_validation():
    with pytest.raises(ValueError):
        EnsembleForecastConfig(ensemble_size=1)
    with pytest.raises(ValueError):
        EnsembleForecastConfig(alpha=1.5)
    with pytest.raises(ValueError):
        EnsembleForecastConfig(dt=0.0)


# -- Gaussian pair ------------------------------------------------------------

def test_identical_pair_is_flat():
    d = gaussian_pair_pit_density(GaussianPairScenario(0.0, 1.0, 0.0, 1.0))
    np.testing.assert_allclose(d(np.linspace(0.01, 0.99, 99)), 1.0, rtol=1e-12)


def test_pair_density_mass():
    d = gaussian_pair_pit_density(GaussianPairScenario())
    assert integrate.quad(d, 0, 1, limit=200, epsabs=1e-12)[0] == pytest.approx(1.0, abs=1e-8)
    rng = np.random.default_rng(8)
    for _ in range(20):
        s = GaussianPairScenario(rng.uniform(-1, 1), rng.uniform(0.5, 2), rng.uniform(-1, 1),
                                 rng.uniform(0.5, 2))
        mirror = GaussianPairScenario(-s.truth_mean, s.truth_sd, -s.forecast_mean, s.forecast_sd)
        # f = Phi(u) resolves the (possibly singular) ends; the upper half is the
        # lower half of the mirrored scenario, where Phi(u) keeps full precision
        mass = sum(integrate.quad(lambda u, d=gaussian_pair_pit_density(c): d(stats.norm.cdf(u))
                                  * stats.norm.pdf(u), -np.inf, 0.0, limit=200)[0]
                   for c in (s, mirror))
        assert mass == pytest.approx(1.0, abs=1e-6)


def test_pair_cdf_and_density_agree():
    s = GaussianPairScenario()
    d, c = gaussian_pair_pit_density(s), gaussian_pair_pit_cdf(s)
    f = np.linspace(0.05, 0.95, 19)
    np.testing.assert_allclose([integrate.quad(d, 0, v)[0] for v in f], c(f), atol=1e-9)


def test_pair_mode():
    d = gaussian_pair_pit_density(GaussianPairScenario())
    grid = np.linspace(1e-6, 1 - 1e-6, 200001)
    k = int(np.argmax(d(grid)))
    assert 0 < k < grid.size - 1
    res = optimize.minimize_scalar(lambda f: -d(f), bounds=(0.01, 0.99), method="bounded",
                                   options={"xatol": 1e-10})
    assert grid[k] == pytest.approx(res.x, abs=1e-4)


def test_pair_foa():
    a = gaussian_pair_foa(GaussianPairScenario(), 100, seed=5, t0=7)
    assert a.time_index[0] == 7 and len(a) == 100
    b = gaussian_pair_foa(GaussianPairScenario(), 100, seed=5, t0=7)
    assert a.observations.tolist() == b.observations.tolist()
    with pytest.raises(ValueError):
        GaussianPairScenario(0.0, -1.0, 0.0, 1.0)


# -- BMA ----------------------------------------------------------------------

def test_bma_single_model_recovers_width():
    rng = stream(9, 0)
    centre = 3.0 * rng.standard_normal(500)
    members = centre[:, None] + 0.01 * rng.standard_normal((500, 8))
    obs = centre + 0.7 * rng.standard_normal(500)
    # one model takes all the weight; its width recovers the generator sd
    m = bma_em_fit([members], obs)
    assert m.weights.tolist() == [1.0]
    assert m.sigmas[0] == pytest.approx(0.7, rel=0.1)


def test_bma_noise_model_loses_weight():
    rng = stream(10, 0)
    obs = 2.0 * rng.standard_normal(500)
    good = obs[:, None] + 0.5 * rng.standard_normal((500, 6))
    noise = 3.0 * rng.standard_normal((500, 6))
    m = bma_em_fit([good, noise], obs)
    assert m.weights[1] < 0.1
    assert m.weights.sum() == pytest.approx(1.0)


def test_bma_likelihood_monotone_and_simplex():
    obs, ens = enso_series(EnsoConfig(), 3)
    m = bma_em_fit([e[:200] for e in ens], obs[:200])
    h = np.array(m.loglik_history)
    assert np.all(np.diff(h) >= -1e-9)
    assert np.all(m.weights >= 0) and m.weights.sum() == pytest.approx(1.0)
    f = bma_forecast(m, [e[250] for e in ens])
    assert f.weights.sum() == pytest.approx(1.0)
    sizes = EnsoConfig().members
    for k, size in enumerate(sizes):
        lo = sum(sizes[:k])
        np.testing.assert_allclose(f.weights[lo:lo + size], m.weights[k] / size)


def test_bma_needs_twenty_cases():
    with pytest.raises(ValueError):
        bma_em_fit([np.zeros((10, 3))], np.zeros(10))


# -- ENSO-like ----------------------------------------------------------------

def test_enso_pit_is_correlated():
    f = pit(make_enso_like_foa(EnsoConfig(), 7))
    assert len(f) == 430 - 36
    assert sample_acf(f.values, 1)[1] > 0.2


def test_enso_thinning_restores_band():
    cfg = EnsoConfig(n_records=36 + 4000)
    f = pit(make_enso_like_foa(cfg, 8))
    r = autocorrelation(f)
    t = thin(f, r.suggested_factor)
    a = sample_acf(t.values, 5)
    assert r.suggested_factor > 1
    assert np.all(np.abs(a[1:]) < 2 / math.sqrt(len(t)))


def test_enso_calibrated_limit():
    cfg = EnsoConfig(n_records=500 + 4000, n_train=500, model_bias=(0.0,) * 3,
                     error_sd=(0.0,) * 3, member_sd=(0.3,) * 3)
    f = pit(make_enso_like_foa(cfg, 7))
    assert len(f) == 4000
    assert gpme.fit(f).gain_report().delta_s_bar < 0.02


def test_enso_config_json():
    cfg = EnsoConfig.from_json({"members": [5, 5], "model_bias": [0, 0], "error_sd": [0.1, 0.1],
                                "member_sd": [0.3, 0.3]})
    assert cfg.members == (5, 5)
    with pytest.raises(ValueError):
        EnsoConfig(members=(5,), model_bias=(0,), error_sd=(0.1,), member_sd=(0.3,))


def test_streams_are_independent_and_reproducible():
    a = stream(123, 0).random(5)
    assert a.tolist() == stream(123, 0).random(5).tolist()
    assert a.tolist() != stream(123, 1).random(5).tolist()
    assert a.tolist() != stream(124, 0).random(5).tolist()
