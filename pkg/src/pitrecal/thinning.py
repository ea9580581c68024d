"""Autocorrelation of PIT series and thinning toward independence."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .archive import PitSeries, fmt

RUN_LENGTH = 5  # lags k..k+4 must all sit inside the band


@dataclass(frozen=True)
class AcfReport:
    lags: np.ndarray
    acf: np.ndarray
    noise_band: float
    suggested_factor: int

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("lag,acf,band\n")
            for k, a in zip(self.lags, self.acf):
                fh.write(f"{int(k)},{fmt(a)},{fmt(self.noise_band)}\n")


def _values(series):
    return series.values if isinstance(series, PitSeries) else np.asarray(series, dtype=float)


def sample_acf(x, max_lag):
    x = np.asarray(x, dtype=float) - np.mean(x)
    denom = x @ x
    if denom == 0:
        raise ValueError("constant series has no autocorrelation")
    return np.array([1.0] + [(x[:-k] @ x[k:]) / denom for k in range(1, max_lag + 1)])


def autocorrelation(series, max_lag=40, max_factor=20) -> AcfReport:
    """Sample ACF and the smallest lag k after which a run of lags stays in the 2/sqrt(N) band."""
    v = _values(series)
    n = v.size
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if n <= 4 * max_lag:
        raise ValueError(f"series of length {n} too short for max_lag={max_lag} (need N > {4 * max_lag})")
    acf = sample_acf(v, max_lag)
    band = 2.0 / math.sqrt(n)
    inside = np.abs(acf) < band
    factor = max_factor
    for k in range(1, max_lag + 1):
        if np.all(inside[k:min(k + RUN_LENGTH - 1, max_lag) + 1]):
            factor = k
            break
    return AcfReport(np.arange(max_lag + 1), acf, band, int(min(factor, max_factor)))


def thin(series: PitSeries, factor: int, offset: int = 0) -> PitSeries:
    """Keep every ``factor``-th value starting at ``offset``."""
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if not 0 <= offset < factor:
        raise ValueError("offset must satisfy 0 <= offset < factor")
    return PitSeries(series.values[offset::factor], series.time_index[offset::factor])
