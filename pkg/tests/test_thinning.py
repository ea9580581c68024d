import math

import numpy as np
import pytest
from scipy import stats

from pitrecal.archive import PitSeries
from pitrecal.thinning import autocorrelation, sample_acf, thin


def ar1_pit(n, phi, seed):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0]
    scale = math.sqrt(1 - phi * phi)
    for i in range(1, n):
        x[i] = phi * x[i - 1] + scale * e[i]
    # unit stationary variance, so the normal cdf maps to uniform marginals
    return PitSeries.from_values(stats.norm.cdf(x))


def test_white_noise_needs_no_thinning():
    s = PitSeries.from_values(np.random.default_rng(5).random(5000))
    r = autocorrelation(s)
    assert r.acf[0] == 1.0
    assert r.suggested_factor == 1
    assert r.noise_band == pytest.approx(2 / math.sqrt(5000))


def test_ar1_factor_and_thinned_band():
    # white noise clears a five-lag 2/sqrt(N) band ~79% of the time
    hits = 0
    for seed in range(40):
        s = ar1_pit(5000, 0.8, seed)
        r = autocorrelation(s)
        assert r.suggested_factor >= 5
        t = thin(s, r.suggested_factor)
        hits += bool(np.all(np.abs(sample_acf(t.values, 5)[1:]) < 2 / math.sqrt(len(t))))
    assert hits >= 24


def test_factor_capped():
    s = ar1_pit(5000, 0.99, 1)
    assert autocorrelation(s, max_lag=40, max_factor=20).suggested_factor == 20
    assert autocorrelation(s, max_lag=40, max_factor=7).suggested_factor == 7


def test_factor_grows_with_n_for_ar1():
    small = autocorrelation(ar1_pit(500, 0.8, 2), max_lag=40).suggested_factor
    large = autocorrelation(ar1_pit(20000, 0.8, 2), max_lag=40).suggested_factor
    assert large >= small


def test_affine_invariance():
    v = ar1_pit(2000, 0.5, 4).values
    np.testing.assert_allclose(sample_acf(3.0 * v - 7.0, 10), sample_acf(v, 10), atol=1e-12)


def test_too_short_and_constant():
    with pytest.raises(ValueError):
        autocorrelation(PitSeries.from_values(np.random.default_rng(0).random(160)), max_lag=40)
    with pytest.raises(ValueError):
        sample_acf(np.full(50, 0.5), 3)


def test_thin_lengths_and_order():
    s = PitSeries.from_values(np.linspace(0.001, 0.999, 394))
    t = thin(s, 5)
    assert len(t) == 79
    assert thin(s, 1).values.tolist() == s.values.tolist()
    for f in (2, 3, 7):
        for o in range(f):
            t = thin(s, f, o)
            assert len(t) == math.ceil((394 - o) / f)
            np.testing.assert_array_equal(t.values, s.values[o::f])
            np.testing.assert_array_equal(t.time_index, s.time_index[o::f])


def test_thin_rejects_bad_arguments():
    s = PitSeries.from_values([0.1, 0.2, 0.3])
    with pytest.raises(ValueError):
        thin(s, 0)
    with pytest.raises(ValueError):
        thin(s, 2, 2)


def test_acf_csv(tmp_path):
    r = autocorrelation(ar1_pit(400, 0.3, 8), max_lag=10)
    r.to_csv(tmp_path / "a.csv")
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "lag,acf,band" and len(lines) == 12
    assert lines[1].startswith("0,1,")
