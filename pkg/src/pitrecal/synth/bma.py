"""Bayesian model averaging over multi-model ensembles with exchangeable members.

Each model's members share one weight (split equally) and one Gaussian
width. Members are bias-corrected model by model by regressing the
observation on the model's ensemble mean.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..distributions import GaussianMixture

log = logging.getLogger(__name__)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class BmaModel:
    weights: np.ndarray  # per model, on the simplex
    sigmas: np.ndarray
    intercepts: np.ndarray
    slopes: np.ndarray
    sizes: tuple
    converged: bool = True
    iterations: int = 0
    loglik_history: list = field(default_factory=list)

    def correct(self, k, members):
        return self.intercepts[k] + self.slopes[k] * np.asarray(members, dtype=float)


def _as_models(ensembles):
    out = [np.atleast_2d(np.asarray(e, dtype=float)) for e in ensembles]
    n = out[0].shape[0]
    if any(e.shape[0] != n for e in out):
        raise ValueError("every model needs the same number of cases")
    return out


def _log_terms(corrected, obs, weights, sigmas):
    """log of (w_k / m_k) phi(y; member, sigma_k) for every member of every model."""
    parts = []
    for k, c in enumerate(corrected):
        u = (obs[:, None] - c) / sigmas[k]
        parts.append(math.log(weights[k] / c.shape[1]) - 0.5 * u * u - math.log(sigmas[k]) - _LOG_SQRT_2PI)
    return parts


def bma_em_fit(ensembles, obs, tol=1e-8, max_iter=500, min_sigma=1e-6) -> BmaModel:
    """Fit weights and widths by EM after per-model linear bias correction.

    ``ensembles`` is a sequence over models of (n_cases, members) arrays.
    """
    models = _as_models(ensembles)
    obs = np.asarray(obs, dtype=float)
    n_cases = obs.size
    if n_cases < 20:
        raise ValueError("need at least 20 training cases")
    K = len(models)

    a, b = np.zeros(K), np.ones(K)
    for k, e in enumerate(models):
        m = e.mean(axis=1)
        if np.ptp(m) > 0:
            b[k], a[k] = np.polyfit(m, obs, 1)
        else:
            a[k], b[k] = obs.mean() - m.mean(), 1.0
    corrected = [a[k] + b[k] * e for k, e in enumerate(models)]

    w = np.full(K, 1.0 / K)
    s = np.array([max(np.std(obs - c.mean(axis=1)), min_sigma) for c in corrected])
    history, converged = [], False
    for it in range(1, max_iter + 1):
        parts = _log_terms(corrected, obs, w, s)
        top = np.max([p.max(axis=1) for p in parts], axis=0)
        norm = sum(np.exp(p - top[:, None]).sum(axis=1) for p in parts)
        ll = float(np.sum(top + np.log(norm)))
        history.append(ll)
        if len(history) > 1 and history[-1] - history[-2] < tol:
            converged = True
            break
        resp = [np.exp(p - top[:, None]) / norm[:, None] for p in parts]
        mass = np.array([r.sum() for r in resp])
        w = mass / n_cases
        w = w / w.sum()
        s = np.array([
            max(math.sqrt(np.sum(r * (obs[:, None] - c) ** 2) / mk), min_sigma) if mk > 0 else s[k]
            for k, (r, c, mk) in enumerate(zip(resp, corrected, mass))
        ])
    if not converged:
        log.warning("BMA EM stopped at %d iterations without meeting tolerance", max_iter)
    return BmaModel(w, s, a, b, tuple(e.shape[1] for e in models), converged, it, history)


def bma_forecast(model: BmaModel, ensembles) -> GaussianMixture:
    """Mixture forecast for one case; ``ensembles`` holds one member vector per model."""
    ws, mus, sds = [], [], []
    for k, e in enumerate(ensembles):
        e = np.asarray(e, dtype=float).ravel()
        if model.weights[k] == 0:
            continue
        ws.append(np.full(e.size, model.weights[k] / e.size))
        mus.append(model.correct(k, e))
        sds.append(np.full(e.size, model.sigmas[k]))
    w = np.concatenate(ws)
    return GaussianMixture(w / w.sum(), np.concatenate(mus), np.concatenate(sds))
