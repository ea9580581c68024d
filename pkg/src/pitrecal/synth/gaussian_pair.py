"""A fixed misspecified Gaussian forecast of Gaussian truth: the analytic oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from ..archive import ForecastObservationArchive, ForecastRecord
from ..distributions import normal
from ._seeding import stream


@dataclass(frozen=True)
class GaussianPairScenario:
    truth_mean: float = 0.0
    truth_sd: float = 1.0
    forecast_mean: float = 0.3
    forecast_sd: float = 1.3

    def __post_init__(self):
        if not (self.truth_sd > 0 and self.forecast_sd > 0):
            raise ValueError("sds must be > 0")


def gaussian_pair_foa(scenario: GaussianPairScenario, n: int, seed: int, t0: int = 0):
    if n < 1:
        raise ValueError("n must be >= 1")
    x = scenario.truth_mean + scenario.truth_sd * stream(seed).standard_normal(n)
    fc = normal(scenario.forecast_mean, scenario.forecast_sd)
    return ForecastObservationArchive(ForecastRecord(t0 + i, float(v), fc) for i, v in enumerate(x))


_TINY = np.finfo(float).tiny
_BELOW_ONE = np.nextafter(1.0, 0.0)


def _x_of_f(s, f):
    return s.forecast_mean + s.forecast_sd * ndtri(np.asarray(f, dtype=float))


def gaussian_pair_pit_density(s: GaussianPairScenario):
    """True PIT density: the truth/forecast density ratio at x = F^-1(f)."""

    def density(f):
        # the endpoints map to infinite x; evaluate just inside them
        x = _x_of_f(s, np.clip(f, _TINY, _BELOW_ONE))
        zt = (x - s.truth_mean) / s.truth_sd
        zf = (x - s.forecast_mean) / s.forecast_sd
        out = (s.forecast_sd / s.truth_sd) * np.exp(-0.5 * zt * zt + 0.5 * zf * zf)
        return out if np.ndim(f) else float(out)

    return density


def gaussian_pair_pit_cdf(s: GaussianPairScenario):
    """True distribution function of the PIT values."""

    def cdf(f):
        return ndtr((_x_of_f(s, f) - s.truth_mean) / s.truth_sd)

    return cdf
