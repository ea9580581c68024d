"""A slow seasonal index forecast by a biased, overdispersed multi-model ensemble.

The observed index is a latent signal plus measurement noise. Each model
sees the signal through a bias and a slowly varying AR(1) error shared by
its members, so successive PIT values are positively correlated. With no
bias, no model error and member spread equal to the measurement noise,
members and observation are exchangeable and the system is calibrated.
BMA is trained on the leading records and the rest are emitted as the
archive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..archive import ForecastObservationArchive, ForecastRecord
from ._seeding import stream
from .bma import bma_em_fit, bma_forecast


@dataclass(frozen=True)
class EnsoConfig:
    n_records: int = 430
    n_train: int = 36
    ar: tuple = (1.7, -0.75)
    innovation_sd: float = 0.3
    seasonal_amplitude: float = 1.0
    period: int = 12
    obs_noise_sd: float = 0.3
    members: tuple = (10, 12, 24)
    model_bias: tuple = (0.5, -0.3, 0.2)
    error_sd: tuple = (0.4, 0.5, 0.6)
    error_ar: float = 0.6
    member_sd: tuple = (0.8, 0.9, 1.0)
    burn_in: int = 200

    def __post_init__(self):
        k = len(self.members)
        if k < 2:
            raise ValueError("need at least two models")
        if not (len(self.model_bias) == len(self.error_sd) == len(self.member_sd) == k):
            raise ValueError("per-model tuples must have one entry per model")
        if not 20 <= self.n_train < self.n_records:
            raise ValueError("need 20 <= n_train < n_records")
        if self.obs_noise_sd < 0 or min(self.error_sd) < 0 or min(self.member_sd) <= 0:
            raise ValueError("noise scales must be nonnegative and member_sd positive")
        if not -1.0 < self.error_ar < 1.0:
            raise ValueError("error_ar must lie in (-1, 1)")

    @classmethod
    def from_json(cls, obj):
        obj = {k: tuple(v) if isinstance(v, list) else v for k, v in obj.items()}
        return cls(**obj)


def _ar1(rng, n, phi, sd, burn):
    e = np.zeros(n + burn)
    innov = sd * np.sqrt(1.0 - phi * phi)  # stationary sd equals ``sd``
    shocks = rng.standard_normal(n + burn)
    for t in range(1, n + burn):
        e[t] = phi * e[t - 1] + innov * shocks[t]
    return e[burn:]


def enso_series(cfg: EnsoConfig, seed: int):
    """Observed index and per-model member forecasts, (obs, [ (n, m_k) arrays ])."""
    rng = stream(seed, 0)
    n, burn = cfg.n_records, cfg.burn_in
    x = np.zeros(n + burn)
    shocks = cfg.innovation_sd * rng.standard_normal(n + burn)
    for t in range(2, n + burn):
        x[t] = cfg.ar[0] * x[t - 1] + cfg.ar[1] * x[t - 2] + shocks[t]
    t = np.arange(n)
    signal = x[burn:] + cfg.seasonal_amplitude * np.cos(2.0 * np.pi * t / cfg.period)
    obs = signal + cfg.obs_noise_sd * rng.standard_normal(n)
    ens = []
    for k, m in enumerate(cfg.members):
        rk = stream(seed, 1 + k)
        err = _ar1(rk, n, cfg.error_ar, cfg.error_sd[k], burn)
        centre = signal + cfg.model_bias[k] + err
        ens.append(centre[:, None] + cfg.member_sd[k] * rk.standard_normal((n, m)))
    return obs, ens


def make_enso_like_foa(cfg: EnsoConfig, seed: int, return_model=False):
    obs, ens = enso_series(cfg, seed)
    nt = cfg.n_train
    model = bma_em_fit([e[:nt] for e in ens], obs[:nt])
    records = [
        ForecastRecord(i, float(obs[i]), bma_forecast(model, [e[i] for e in ens]))
        for i in range(nt, cfg.n_records)
    ]
    archive = ForecastObservationArchive(records)
    return (archive, model) if return_model else archive
