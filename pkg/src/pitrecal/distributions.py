"""Univariate forecast distributions with pdf, cdf and quantile."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _accel

# bracket-width stopping rule for mixture bisection: |dx| <= XTOL * (1 + |x|)
QUANTILE_XTOL = 1e-13


class InvalidDistribution(ValueError):
    pass


class ForecastDistribution:
    """Base class: an absolutely continuous distribution on the real line.

    Subclasses implement ``pdf``, ``cdf`` and ``quantile``, each accepting
    scalars or arrays and returning the same shape.
    """

    kind = "abstract"

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, q):
        raise NotImplementedError

    def support(self, eps=1e-9):
        """Interval holding all but ``2 * eps`` of the mass."""
        return float(self.quantile(eps)), float(self.quantile(1.0 - eps))

    def to_json(self):
        raise NotImplementedError


def _shape_back(x, values):
    if np.ndim(x) == 0:
        return float(values[0])
    return values.reshape(np.shape(x))


@dataclass(frozen=True, eq=False)
class GaussianMixture(ForecastDistribution):
    """Finite mixture of normals.

    Parameters
    ----------
    weights : array_like
        Mixture weights on the probability simplex.
    means, sds : array_like
        Component means and standard deviations (predictand units).
    """

    weights: np.ndarray
    means: np.ndarray
    sds: np.ndarray
    kind = "gmm"

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        mu = np.atleast_1d(np.asarray(self.means, dtype=float))
        sd = np.atleast_1d(np.asarray(self.sds, dtype=float))
        if not (w.shape == mu.shape == sd.shape) or w.ndim != 1 or w.size == 0:
            raise InvalidDistribution("weights, means and sds must be equal-length 1-d arrays")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(mu)) and np.all(np.isfinite(sd))):
            raise InvalidDistribution("mixture parameters must be finite")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise InvalidDistribution("weights must be non-negative and sum to 1")
        if np.any(sd <= 0):
            raise InvalidDistribution("component sds must be > 0")
        for name, arr in (("weights", w / w.sum()), ("means", mu), ("sds", sd)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def pdf(self, x):
        xs = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        return _shape_back(x, _accel.mixture_pdf(self.weights, self.means, self.sds, xs))

    def cdf(self, x):
        xs = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        vals = np.clip(_accel.mixture_cdf(self.weights, self.means, self.sds, xs), 0.0, 1.0)
        return _shape_back(x, vals)

    def quantile(self, q):
        qs = np.atleast_1d(np.asarray(q, dtype=float)).ravel()
        if np.any((qs < 0) | (qs > 1)):
            raise ValueError("quantile level outside [0, 1]")
        if self.weights.size == 1:
            from scipy.special import ndtri

            vals = self.means[0] + self.sds[0] * ndtri(qs)
        else:
            vals = _accel.mixture_quantile(self.weights, self.means, self.sds, qs, QUANTILE_XTOL)
        return _shape_back(q, vals)

    def to_json(self):
        return {"type": "gmm", "w": self.weights.tolist(), "mu": self.means.tolist(),
                "sigma": self.sds.tolist()}


@dataclass(frozen=True, eq=False)
class GridCdf(ForecastDistribution):
    """Piecewise-linear cdf through the knots ``(xs, cdf)``.

    The pdf is piecewise constant and vanishes outside ``[xs[0], xs[-1]]``.
    """

    xs: np.ndarray
    cdf_values: np.ndarray = field(repr=False)
    kind = "grid"

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        cv = np.asarray(self.cdf_values, dtype=float)
        if xs.ndim != 1 or xs.shape != cv.shape or xs.size < 2:
            raise InvalidDistribution("xs and cdf must be equal-length 1-d arrays (>= 2 knots)")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(cv))):
            raise InvalidDistribution("grid must be finite")
        if np.any(np.diff(xs) <= 0):
            raise InvalidDistribution("xs must be strictly increasing")
        if cv[0] != 0.0 or cv[-1] != 1.0:
            raise InvalidDistribution("cdf must start at 0 and end at 1")
        if np.any(np.diff(cv) <= 0):
            # zero-density stretches would break the positivity requirement
            raise InvalidDistribution("cdf must be strictly increasing between knots")
        for name, arr in (("xs", xs), ("cdf_values", cv)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_dens", np.diff(cv) / np.diff(xs))

    def pdf(self, x):
        xv = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        idx = np.searchsorted(self.xs, xv, side="right") - 1
        inside = (xv >= self.xs[0]) & (xv < self.xs[-1])
        out = np.zeros_like(xv)
        out[inside] = self._dens[idx[inside]]
        return _shape_back(x, out)

    def cdf(self, x):
        xv = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        return _shape_back(x, np.interp(xv, self.xs, self.cdf_values))

    def quantile(self, q):
        qv = np.atleast_1d(np.asarray(q, dtype=float)).ravel()
        if np.any((qv < 0) | (qv > 1)):
            raise ValueError("quantile level outside [0, 1]")
        return _shape_back(q, np.interp(qv, self.cdf_values, self.xs))

    def to_json(self):
        return {"type": "grid", "xs": self.xs.tolist(), "cdf": self.cdf_values.tolist()}


def from_json(obj) -> ForecastDistribution:
    """Build a distribution from its JSON-lines ``forecast`` object."""
    kind = obj.get("type")
    if kind == "gmm":
        return GaussianMixture(obj["w"], obj["mu"], obj["sigma"])
    if kind == "grid":
        return GridCdf(obj["xs"], obj["cdf"])
    raise InvalidDistribution(f"unknown forecast type {kind!r}")


def normal(mean=0.0, sd=1.0) -> GaussianMixture:
    return GaussianMixture([1.0], [mean], [sd])
