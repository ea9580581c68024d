"""Pure numpy implementations of the hot kernels.

Every function here has a twin of the same name and signature in the
compiled ``_speedups`` module; ``pitrecal._accel`` picks one at import.
"""

import numpy as np
from scipy.special import ndtr

SQRT_2PI = np.sqrt(2.0 * np.pi)


def ms_derivs(x, y, z, R, G):
    return y, -y + R * x - G * (x + z) - R * x * z * z, x


def _rk4(x, y, z, R, G, dt):
    h = 0.5 * dt
    k1x, k1y, k1z = ms_derivs(x, y, z, R, G)
    k2x, k2y, k2z = ms_derivs(x + h * k1x, y + h * k1y, z + h * k1z, R, G)
    k3x, k3y, k3z = ms_derivs(x + h * k2x, y + h * k2y, z + h * k2z, R, G)
    k4x, k4y, k4z = ms_derivs(x + dt * k3x, y + dt * k3y, z + dt * k3z, R, G)
    c = dt / 6.0
    return (
        x + c * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        y + c * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
        z + c * (k1z + 2.0 * k2z + 2.0 * k3z + k4z),
    )


def ms_trajectory(x0, y0, z0, R, G, dt, steps):
    """RK4 trajectory, shape (steps + 1, 3). Returns (states, bad_step).

    ``bad_step`` is -1 when every state is finite, otherwise the index of
    the first non-finite state (the array is truncated there).
    """
    out = np.empty((steps + 1, 3))
    x, y, z = float(x0), float(y0), float(z0)
    out[0] = x, y, z
    for i in range(1, steps + 1):
        x, y, z = _rk4(x, y, z, R, G, dt)
        if not (np.isfinite(x) and np.isfinite(y) and np.isfinite(z)):
            return out[:i], i
        out[i, 0] = x
        out[i, 1] = y
        out[i, 2] = z
    return out, -1


def ms_ensemble(states, R, G, dt, steps):
    """Advance every row of ``states`` (n, 3) by ``steps`` RK4 steps."""
    s = np.array(states, dtype=float, copy=True)
    x, y, z = s[:, 0], s[:, 1], s[:, 2]
    for _ in range(steps):
        x, y, z = _rk4(x, y, z, R, G, dt)
    return np.column_stack([x, y, z])


def mixture_cdf(w, mu, sd, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return ndtr((x[:, None] - mu[None, :]) / sd[None, :]) @ w


def mixture_pdf(w, mu, sd, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = (x[:, None] - mu[None, :]) / sd[None, :]
    return (np.exp(-0.5 * u * u) / (SQRT_2PI * sd[None, :])) @ w


def mixture_quantile(w, mu, sd, q, xtol):
    """Bisection on the mixture cdf, vectorised over ``q``.

    Stops once the bracket is narrower than ``xtol * (1 + |x|)``.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    lo = np.full(q.shape, np.min(mu - 40.0 * sd))
    hi = np.full(q.shape, np.max(mu + 40.0 * sd))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = mixture_cdf(w, mu, sd, mid) < q
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= xtol * (1.0 + np.abs(mid))):
            break
    return 0.5 * (lo + hi)


def var_quadrature(h, C):
    """sum_ij h_i h_j (exp(C_ij) - 1) for a symmetric C."""
    return float(h @ np.expm1(C) @ h)
