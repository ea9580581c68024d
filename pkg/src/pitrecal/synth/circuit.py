"""Ensemble forecasts of a chaotic oscillator from a deliberately imperfect model.

Truth runs the Moore-Spiegel system at (R, gamma); forecasts run it at
(R', gamma'). Each ensemble is dressed with equal-width Gaussian kernels
and blended with a kernel-density climatology. Kernel width and blend
weight are chosen on a separate dressing set by minimising ignorance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ..archive import ForecastObservationArchive, ForecastRecord
from ..distributions import GaussianMixture
from ._seeding import stream
from .moore_spiegel import GAMMA_DEFAULT, R_DEFAULT, MooreSpiegelState, ms_ensemble, ms_trajectory

ALPHA_GRID = np.round(np.arange(21) * 0.05, 10)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class EnsembleForecastConfig:
    ensemble_size: int = 127
    perturbation_sd: float = 0.02
    analysis_sd: float = 0.0  # truth-to-ensemble-centre error; 0 centres on the true state
    lead_steps: int = 8
    dt: float = 0.01
    model_R: float = 10.5
    model_gamma: float = GAMMA_DEFAULT
    truth_R: float = R_DEFAULT
    truth_gamma: float = GAMMA_DEFAULT
    obs_noise_sd: float = 0.01  # measurement noise on the verifying value
    stride: int = 500
    spinup: int = 5000
    n_dressing: int = 512
    kernel_sd: float | None = None  # fitted when None
    alpha: float | None = None  # fitted when None
    clim_samples: int = 2000
    clim_components: int = 80

    def __post_init__(self):
        if self.ensemble_size < 2:
            raise ValueError("ensemble_size must be >= 2")
        if not 0.0 < self.dt:
            raise ValueError("dt must be > 0")
        if self.perturbation_sd < 0 or self.analysis_sd < 0 or self.obs_noise_sd < 0:
            raise ValueError("noise scales must be nonnegative")
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.kernel_sd is not None and not self.kernel_sd > 0:
            raise ValueError("kernel_sd must be > 0")


@dataclass(frozen=True)
class Climatology:
    """Histogram-compressed Gaussian kernel density of truth z values."""

    weights: np.ndarray
    centers: np.ndarray
    bandwidth: float

    @classmethod
    def from_samples(cls, z, n_components):
        z = np.asarray(z, dtype=float)
        bw = 1.06 * np.std(z) * z.size ** -0.2
        counts, edges = np.histogram(z, bins=n_components)
        keep = counts > 0
        w = counts[keep] / counts.sum()
        c = 0.5 * (edges[:-1] + edges[1:])[keep]
        # merge the within-bin spread into the kernel width
        width = math.sqrt(bw * bw + (edges[1] - edges[0]) ** 2 / 12.0)
        return cls(w, c, width)

    def pdf(self, x):
        u = (np.asarray(x, dtype=float)[..., None] - self.centers) / self.bandwidth
        return np.exp(-0.5 * u * u) @ self.weights / (self.bandwidth * math.sqrt(2.0 * math.pi))

    def distribution(self):
        return GaussianMixture(self.weights, self.centers, np.full(self.centers.size, self.bandwidth))


def _dressed_logpdf(members, obs, sd):
    u = (obs[:, None] - members) / sd
    m = -0.5 * u * u
    top = m.max(axis=1)
    return top + np.log(np.mean(np.exp(m - top[:, None]), axis=1)) - math.log(sd) - _LOG_SQRT_2PI


def blend_ignorance(members, obs, clim, sd, alpha):
    """Mean -log2 density of the dressed-and-blended forecasts at ``obs``."""
    p = np.exp(_dressed_logpdf(members, obs, sd))
    q = (1.0 - alpha) * p + alpha * clim.pdf(obs)
    with np.errstate(divide="ignore"):
        return float(-np.mean(np.log2(q)))


def _golden_log(fun, lo, hi, scan=41):
    """Minimise ``fun`` over [lo, hi]: coarse scan to bracket, then golden section."""
    xs = np.linspace(lo, hi, scan)
    ys = np.array([fun(x) for x in xs])
    k = int(np.argmin(ys))
    if k == 0 or k == scan - 1:
        return float(xs[k]), float(ys[k])
    res = optimize.minimize_scalar(fun, bracket=(xs[k - 1], xs[k], xs[k + 1]), method="golden",
                                   options={"xtol": 1e-6})
    return float(res.x), float(res.fun)


def fit_kernel_sd(members, obs, clim, alpha, sd_bounds=(1e-4, 10.0)):
    ls, ign = _golden_log(lambda v: blend_ignorance(members, obs, clim, math.exp(v), alpha),
                          math.log(sd_bounds[0]), math.log(sd_bounds[1]))
    return math.exp(ls), ign


def fit_dressing(members, obs, clim, sd_bounds=(1e-4, 10.0)):
    """Golden-section on log kernel width, nested in a grid over the blend weight."""
    best = (None, None, math.inf)
    for alpha in ALPHA_GRID:
        sd, ign = fit_kernel_sd(members, obs, clim, float(alpha), sd_bounds)
        if ign < best[2]:
            best = (sd, float(alpha), ign)
    return best


def _initial_states(cfg, count, rng):
    s0 = MooreSpiegelState(*(0.1 + 0.01 * rng.standard_normal(3)), cfg.truth_R, cfg.truth_gamma)
    steps = cfg.spinup + cfg.stride * count
    traj = ms_trajectory(s0, cfg.dt, steps)
    return traj[cfg.spinup + cfg.stride::cfg.stride][:count], traj[cfg.spinup:]


def _forecast_cases(cfg, states, rng):
    n, m = states.shape[0], cfg.ensemble_size
    truth = ms_ensemble(states, cfg.truth_R, cfg.truth_gamma, cfg.dt, cfg.lead_steps)
    obs = truth[:, 2] + cfg.obs_noise_sd * rng.standard_normal(n)
    # members scatter about an analysis state that may itself miss the truth;
    # analysis_sd == perturbation_sd makes truth and members exchangeable
    analysis = states + cfg.analysis_sd * rng.standard_normal((n, 3))
    pert = analysis[:, None, :] + cfg.perturbation_sd * rng.standard_normal((n, m, 3))
    ens = ms_ensemble(pert.reshape(-1, 3), cfg.model_R, cfg.model_gamma, cfg.dt, cfg.lead_steps)
    return ens[:, 2].reshape(n, m), obs


@dataclass
class CircuitRun:
    archive: ForecastObservationArchive
    kernel_sd: float
    alpha: float
    dressing_ignorance: float
    climatology: Climatology


def make_circuit_foa(config: EnsembleForecastConfig, n_forecasts: int, seed: int,
                     return_details=False):
    """Synthetic forecast-observation archive from the imperfect-model ensemble."""
    cfg = config
    rng_traj, rng_clim, rng_ens = stream(seed, 0), stream(seed, 1), stream(seed, 2)
    total = cfg.n_dressing + n_forecasts
    states, long_traj = _initial_states(cfg, total, rng_traj)
    pick = rng_clim.choice(long_traj.shape[0], size=min(cfg.clim_samples, long_traj.shape[0]),
                           replace=False)
    clim = Climatology.from_samples(long_traj[np.sort(pick), 2], cfg.clim_components)
    members, obs = _forecast_cases(cfg, states, rng_ens)

    sd, alpha, ign = cfg.kernel_sd, cfg.alpha, math.nan
    if sd is None or alpha is None:
        dm, do = members[:cfg.n_dressing], obs[:cfg.n_dressing]
        if sd is None and alpha is None:
            sd, alpha, ign = fit_dressing(dm, do, clim)
        elif sd is None:
            sd, ign = fit_kernel_sd(dm, do, clim, alpha)
        else:
            scores = [blend_ignorance(dm, do, clim, sd, a) for a in ALPHA_GRID]
            alpha, ign = float(ALPHA_GRID[int(np.argmin(scores))]), float(min(scores))

    m = cfg.ensemble_size
    records = []
    for i in range(n_forecasts):
        row = members[cfg.n_dressing + i]
        if alpha > 0:
            w = np.concatenate([np.full(m, (1.0 - alpha) / m), alpha * clim.weights])
            mu = np.concatenate([row, clim.centers])
            sds = np.concatenate([np.full(m, sd), np.full(clim.centers.size, clim.bandwidth)])
        else:
            w, mu, sds = np.full(m, 1.0 / m), row, np.full(m, sd)
        records.append(ForecastRecord(i, float(obs[cfg.n_dressing + i]), GaussianMixture(w, mu, sds)))
    archive = ForecastObservationArchive(records)
    if return_details:
        return CircuitRun(archive, float(sd), float(alpha), ign, clim)
    return archive
