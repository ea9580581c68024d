import os
import subprocess
import sys

import numpy as np
import pytest

from pitrecal import _accel, _fallback

backends = _accel.backends()
needs_compiled = pytest.mark.skipif("compiled" not in backends, reason="extension not built")


def mixture(seed=0, k=7):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(k))
    return w, rng.normal(0, 2, k), rng.uniform(0.2, 1.5, k)


def test_backend_is_reported():
    assert _accel.BACKEND in ("compiled", "python")
    assert set(_accel.KERNELS) <= set(dir(_fallback))


@needs_compiled
def test_kernels_agree():
    c = backends["compiled"]
    w, mu, sd = mixture()
    x = np.linspace(-8, 8, 301)
    np.testing.assert_allclose(c.mixture_cdf(w, mu, sd, x), _fallback.mixture_cdf(w, mu, sd, x),
                               rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(c.mixture_pdf(w, mu, sd, x), _fallback.mixture_pdf(w, mu, sd, x),
                               rtol=1e-13, atol=1e-15)
    q = np.linspace(0.001, 0.999, 97)
    np.testing.assert_allclose(c.mixture_quantile(w, mu, sd, q, 1e-13),
                               _fallback.mixture_quantile(w, mu, sd, q, 1e-13), atol=1e-11)

    rng = np.random.default_rng(1)
    a = rng.normal(size=(40, 40))
    C = 0.01 * (a + a.T)
    h = rng.normal(size=40)
    assert c.var_quadrature(h, C) == pytest.approx(_fallback.var_quadrature(h, C), rel=1e-12)


@needs_compiled
def test_integrators_agree():
    c = backends["compiled"]
    t1, b1 = c.ms_trajectory(0.1, 0.2, 0.3, 10.0, 3.6, 0.01, 2000)
    t2, b2 = _fallback.ms_trajectory(0.1, 0.2, 0.3, 10.0, 3.6, 0.01, 2000)
    assert b1 == b2 == -1
    np.testing.assert_allclose(t1, t2, rtol=1e-10, atol=1e-12)
    s = np.random.default_rng(2).normal(0, 0.5, (25, 3))
    np.testing.assert_allclose(c.ms_ensemble(s, 10.5, 3.6, 0.01, 50),
                               _fallback.ms_ensemble(s, 10.5, 3.6, 0.01, 50), rtol=1e-12, atol=1e-14)


@needs_compiled
def test_divergence_reported_identically():
    c = backends["compiled"]
    _, b1 = c.ms_trajectory(1e3, 1e3, 1e3, 10.0, 3.6, 0.05, 500)
    _, b2 = _fallback.ms_trajectory(1e3, 1e3, 1e3, 10.0, 3.6, 0.05, 500)
    assert b1 == b2 >= 1


def test_forced_fallback_in_subprocess():
    env = dict(os.environ, PITRECAL_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import pitrecal; print(pitrecal.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
