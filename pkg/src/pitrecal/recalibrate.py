"""Recalibrated forecasts: p1(x) = pi(F(x)) p(x), with cdf G(F(x))."""

from __future__ import annotations

import logging

import numpy as np

from .archive import ForecastObservationArchive, ForecastRecord
from .distributions import ForecastDistribution, GridCdf, _shape_back
from .gpme import GpmeModel, predictive_density

log = logging.getLogger(__name__)

DEFAULT_KNOTS = 513


class PitMap:
    """The cumulative G(f) of the (piecewise-linear) predictive density.

    Because the density is linear between grid nodes, G is piecewise
    quadratic and both G and its inverse are evaluated exactly.
    """

    def __init__(self, grid, density):
        self.grid = np.asarray(grid, dtype=float)
        self.density = np.asarray(density, dtype=float)
        h = np.diff(self.grid)
        cells = 0.5 * h * (self.density[:-1] + self.density[1:])
        G = np.concatenate([[0.0], np.cumsum(cells)])
        total = G[-1]
        self.G = G / total
        self.d = self.density / total
        self.G[-1] = 1.0
        self._h = h

    def __call__(self, f):
        fv = np.clip(np.atleast_1d(np.asarray(f, dtype=float)).ravel(), 0.0, 1.0)
        i = np.clip(np.searchsorted(self.grid, fv, side="right") - 1, 0, self.grid.size - 2)
        t = fv - self.grid[i]
        slope = (self.d[i + 1] - self.d[i]) / self._h[i]
        out = self.G[i] + self.d[i] * t + 0.5 * slope * t * t
        out[fv >= 1.0] = 1.0
        return _shape_back(f, np.clip(out, 0.0, 1.0))

    def inverse(self, q):
        qv = np.clip(np.atleast_1d(np.asarray(q, dtype=float)).ravel(), 0.0, 1.0)
        i = np.clip(np.searchsorted(self.G, qv, side="right") - 1, 0, self.grid.size - 2)
        r = qv - self.G[i]
        a = 0.5 * (self.d[i + 1] - self.d[i]) / self._h[i]
        b = self.d[i]
        # stable root of a t^2 + b t - r = 0
        disc = np.sqrt(np.maximum(b * b + 4.0 * a * r, 0.0))
        t = 2.0 * r / (b + disc)
        out = np.clip(self.grid[i] + t, self.grid[i], self.grid[i + 1])
        out[qv >= 1.0] = 1.0
        return _shape_back(q, out)


class RecalibratedForecast(ForecastDistribution):
    """A published forecast reweighted by a fitted PIT density.

    ``rerecalibrated`` is set when ``base`` was itself recalibrated; the
    operation is allowed but the procedure is meant to be applied once.
    """

    kind = "recalibrated"

    def __init__(self, base: ForecastDistribution, model: GpmeModel, pit_map: PitMap | None = None):
        self.base = base
        self.model = model
        self.pit_map = pit_map if pit_map is not None else PitMap(model.grid, model.density)
        self.rerecalibrated = isinstance(base, RecalibratedForecast)
        if self.rerecalibrated:
            log.warning("recalibrating a forecast that is already recalibrated")

    def weight(self, x):
        """pi(F(x)), the multiplicative factor applied to the base density."""
        return predictive_density(self.model, self.base.cdf(x))

    def pdf(self, x):
        f = self.base.cdf(x)
        return predictive_density(self.model, f) * self.base.pdf(x)

    def cdf(self, x):
        return self.pit_map(self.base.cdf(x))

    def quantile(self, q):
        qv = np.asarray(q, dtype=float)
        if np.any((qv < 0) | (qv > 1)):
            raise ValueError("quantile level outside [0, 1]")
        return self.base.quantile(self.pit_map.inverse(q))

    def sample(self, count, seed):
        if count < 1:
            raise ValueError("count must be >= 1")
        u = np.random.default_rng(seed).random(count)
        return np.asarray(self.quantile(u), dtype=float)

    def to_grid(self, knots=DEFAULT_KNOTS, tail=1e-12, anchors=()) -> GridCdf:
        """Approximate as a piecewise-linear grid cdf.

        Knots equidistribute the linear-interpolation error of the cdf
        (spacing ~ |p1'|^-1/2). ``anchors`` are extra abscissae that are
        always included as knots.
        """
        lo, hi = (float(v) for v in self.quantile(np.array([tail, 1.0 - tail])))
        if not hi > lo:
            raise ValueError("degenerate recalibrated support")
        fine = np.linspace(lo, hi, max(8 * knots, 4096))
        p = np.asarray(self.pdf(fine), dtype=float)
        dp = np.abs(np.gradient(p, fine))
        m = np.sqrt(dp) + 0.05 * np.sqrt(dp.max() + p.max())
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (m[1:] + m[:-1]) * np.diff(fine))])
        xs = np.interp(np.linspace(0.0, cum[-1], knots), cum, fine)
        anchors = np.asarray(anchors, dtype=float)
        anchors = anchors[(anchors > lo) & (anchors < hi)]
        xs = np.unique(np.concatenate([xs, anchors]))
        cv = np.asarray(self.cdf(xs), dtype=float)
        cv[0], cv[-1] = 0.0, 1.0
        keep = np.concatenate([[True], np.diff(cv) > 0])
        xs, cv = xs[keep], cv[keep]
        if cv[-1] != 1.0:
            # dropped the last knot as a duplicate level; reinstate the top
            xs, cv = np.append(xs[:-1], hi), np.append(cv[:-1], 1.0)
        return GridCdf(xs, cv)

    def to_json(self, knots=DEFAULT_KNOTS):
        return self.to_grid(knots).to_json()


def recalibrate(base: ForecastDistribution, model: GpmeModel, pit_map: PitMap | None = None):
    return RecalibratedForecast(base, model, pit_map)


def recalibrate_archive(archive: ForecastObservationArchive, model: GpmeModel,
                        as_grid=False, knots=DEFAULT_KNOTS, anchor_observation=True):
    """Recalibrate every record; optionally convert to grid cdfs for export.

    With ``anchor_observation`` the verifying observation is included as a
    knot of the exported grid so the archived PIT equals G(F(x)) exactly.
    """
    pm = PitMap(model.grid, model.density)
    records = []
    for r in archive:
        rf = RecalibratedForecast(r.forecast, model, pm)
        if as_grid:
            rf = rf.to_grid(knots, anchors=[r.observation] if anchor_observation else ())
        records.append(ForecastRecord(r.time_index, r.observation, rf, r.metadata))
    return ForecastObservationArchive(records)


# convenience aliases matching the operation names
def recal_pdf(r, x):
    return r.pdf(x)


def recal_cdf(r, x):
    return r.cdf(x)


def recal_quantile(r, q):
    return r.quantile(q)


def recal_sample(r, count, seed):
    return r.sample(count, seed)
