"""Gaussian-process measure estimation of a density on the unit interval.

A log-Gaussian Cox process: a constant-mean GP prior on the binned
log-intensity, a Laplace (normal-in-log) approximation to the Poisson
bin likelihood, type-II maximum likelihood for the kernel
hyperparameters, and closed-form entropy functionals of the posterior.

All entropy outputs are in bits.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from . import _accel
from .archive import PitSeries

log = logging.getLogger(__name__)

LN2 = math.log(2.0)
JITTER_LADDER = (0.0,) + tuple(10.0 ** k for k in range(-12, -3))


class DegenerateBinning(ValueError):
    pass


class SingularSystem(np.linalg.LinAlgError):
    def __init__(self, theta):
        super().__init__(f"Q + D not factorizable at {theta} even with jitter 1e-4")
        self.theta = theta


class UndefinedFAM(ValueError):
    """Raised when Var(dS) = 0 so the advantage ratio has no value."""


# -- binning ----------------------------------------------------------------

@dataclass(frozen=True)
class BinnedPit:
    """Equal-width histogram of PIT values with every bin populated.

    ``l1`` holds the per-bin log-intensity estimates ln(n / omega) and
    ``noise`` the Laplace noise variances 1 / n.
    """

    edges: np.ndarray
    counts: np.ndarray
    time_range: tuple | None = None

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        n = np.asarray(self.counts, dtype=np.int64)
        if e.ndim != 1 or n.shape != (e.size - 1,):
            raise ValueError("need B + 1 edges for B counts")
        if np.any(n < 1):
            raise DegenerateBinning("every bin needs at least one count")
        if np.any(np.diff(e) <= 0) or abs(e[0]) > 1e-12 or abs(e[-1] - 1.0) > 1e-12:
            raise ValueError("edges must increase from 0 to 1")
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "counts", n)

    @property
    def n_bins(self):
        return self.counts.size

    @property
    def n_total(self):
        return int(self.counts.sum())

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def _sqdist(self):
        # cached: the search evaluates many kernels on the same centers
        d2 = self.__dict__.get("_d2")
        if d2 is None:
            c = self.centers
            d2 = np.subtract.outer(c, c) ** 2
            object.__setattr__(self, "_d2", d2)
        return d2

    @property
    def widths(self):
        # volume fractions; the unit interval has volume 1
        return np.diff(self.edges)

    @property
    def l1(self):
        return np.log(self.counts / self.widths)

    @property
    def noise(self):
        return 1.0 / self.counts


def bin_pit(series, target_count=8) -> BinnedPit:
    """Histogram a PIT series into ``floor(N / target_count)`` equal bins.

    The bin count is reduced one at a time until no bin is empty.
    """
    values = series.values if isinstance(series, PitSeries) else np.asarray(series, dtype=float)
    n = values.size
    if target_count < 5:
        raise ValueError("target_count must be >= 5")
    if n < 3 * target_count:
        raise ValueError(f"need at least {3 * target_count} PIT values, got {n}")
    time_range = None
    if isinstance(series, PitSeries) and len(series):
        time_range = (int(series.time_index.min()), int(series.time_index.max()))
    b = n // target_count
    while b >= 2:
        edges = np.linspace(0.0, 1.0, b + 1)
        counts, _ = np.histogram(values, bins=edges)
        if np.all(counts >= 1):
            return BinnedPit(edges, counts, time_range)
        b -= 1
    raise DegenerateBinning("an empty bin remains even with B = 2 (degenerate PIT series)")


# -- Laplace residuals --------------------------------------------------------

def laplace_residuals(n):
    """Residuals of the Poisson-normal approximation at the +-1 sigma points.

    ``R1`` expands the log-likelihood -mu + n ln mu in the mean mu about
    mu = n (variance n); ``R2`` expands -e^l + n l in the log-mean l about
    l = ln n (variance 1 / n). Returns a dict with keys ``R1_plus``,
    ``R1_minus``, ``R2_plus``, ``R2_minus``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    n = float(n)
    peak = -n + n * math.log(n)

    def r1(mu):
        return (-mu + n * math.log(mu)) - (peak - 0.5 * (mu - n) ** 2 / n)

    def r2(l):
        return (-math.exp(l) + n * l) - (peak - 0.5 * n * (l - math.log(n)) ** 2)

    s_mu, s_l = math.sqrt(n), 1.0 / math.sqrt(n)
    out = {
        "R1_plus": r1(n + s_mu),
        "R2_plus": r2(math.log(n) + s_l),
        "R2_minus": r2(math.log(n) - s_l),
    }
    # mu = n - sqrt(n) is 0 at n = 1, where ln(mu) diverges
    out["R1_minus"] = r1(n - s_mu) if n > 1 else -math.inf
    return out


# -- kernel and hyperparameters ---------------------------------------------

class SquaredExponential:
    name = "squared-exponential"

    def __call__(self, x1, x2, amplitude, length_scale):
        d = np.subtract.outer(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        return self.from_sqdist(d * d, amplitude, length_scale)

    @staticmethod
    def from_sqdist(d2, amplitude, length_scale):
        return amplitude * np.exp(d2 * (-0.5 / (length_scale * length_scale)))


KERNELS = {SquaredExponential.name: SquaredExponential()}


@dataclass(frozen=True)
class KernelParams:
    amplitude: float
    length_scale: float
    jitter: float = 0.0

    def __post_init__(self):
        if not (self.amplitude > 0 and self.length_scale > 0):
            raise ValueError("amplitude and length_scale must be > 0")
        if not 0.0 <= self.jitter <= 1e-4:
            raise ValueError("jitter must lie in [0, 1e-4]")


def _gram(binned, theta, kernel):
    x = binned.centers
    if hasattr(kernel, "from_sqdist"):
        d2 = binned._sqdist()
        return kernel.from_sqdist(d2, theta.amplitude, theta.length_scale)
    return kernel(x, x, theta.amplitude, theta.length_scale)


def _factor(binned, theta, kernel):
    Q = _gram(binned, theta, kernel)
    QD = Q + np.diag(binned.noise)
    idx = np.diag_indices_from(QD)
    for jit in JITTER_LADDER:
        if jit < theta.jitter:
            continue
        try:
            A = QD
            if jit:
                A = QD.copy()
                A[idx] += jit
            cf = linalg.cho_factor(A, lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
        if np.all(np.isfinite(cf[0])):
            return Q, cf, jit
    raise SingularSystem(theta)


def _objective_terms(binned, theta, kernel):
    _, cf, _ = _factor(binned, theta, kernel)
    l1 = binned.l1
    u = np.ones_like(l1)
    sol = linalg.cho_solve(cf, np.column_stack([l1, u]), check_finite=False)
    logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
    quad = l1 @ sol[:, 0]
    cross = l1 @ sol[:, 1]
    norm = u @ sol[:, 1]
    return logdet, quad, cross * cross / norm


def objective(binned, theta, kernel=KERNELS["squared-exponential"]) -> float:
    """Negative log marginal likelihood (x2, up to a constant) with l0 profiled out."""
    logdet, quad, ratio = _objective_terms(binned, theta, kernel)
    return float(logdet + quad - ratio)


def l0_mle(binned, theta, kernel=KERNELS["squared-exponential"]) -> float:
    """Conditional MLE of the GP mean level: a weighted average of ``l1``."""
    _, cf, _ = _factor(binned, theta, kernel)
    g = linalg.cho_solve(cf, np.ones(binned.n_bins), check_finite=False)
    return float(binned.l1 @ g / g.sum())


@dataclass(frozen=True)
class SearchConfig:
    starts_per_axis: int = 4
    log_amplitude_bounds: tuple = (math.log(1e-4), math.log(1e4))
    log_length_bounds: tuple = (math.log(0.01), math.log(10.0))
    fatol: float = 1e-8
    xatol: float = 1e-4
    maxiter: int = 500

    def starts(self):
        k = self.starts_per_axis
        frac = (np.arange(k) + 0.5) / k
        la = self.log_amplitude_bounds[0] + frac * np.diff(self.log_amplitude_bounds)[0]
        ls = self.log_length_bounds[0] + frac * np.diff(self.log_length_bounds)[0]
        return [(a, s) for a in la for s in ls]


@dataclass
class FitResult:
    theta: KernelParams
    objective: float
    converged: bool
    starts: list = field(default_factory=list)


def fit_hyperparams(binned, config=SearchConfig(), kernel=KERNELS["squared-exponential"]) -> FitResult:
    """Minimise the objective over (ln A, ln sigma) from a grid of starts.

    Nelder-Mead inside the box constraints of ``config``. The search is
    deterministic. If no start converges the best point seen is returned
    with ``converged=False``.
    """
    bounds = [config.log_amplitude_bounds, config.log_length_bounds]

    def fun(p):
        try:
            return objective(binned, KernelParams(math.exp(p[0]), math.exp(p[1])), kernel)
        except SingularSystem:
            return math.inf

    runs = []
    for start in config.starts():
        res = optimize.minimize(
            fun, np.array(start), method="Nelder-Mead", bounds=bounds,
            options={"xatol": config.xatol, "fatol": config.fatol, "maxiter": config.maxiter},
        )
        runs.append({"start": [float(s) for s in start], "x": [float(v) for v in res.x],
                     "objective": float(res.fun), "converged": bool(res.success),
                     "iterations": int(res.nit)})
    ok = [r for r in runs if r["converged"] and math.isfinite(r["objective"])]
    pool = ok or [r for r in runs if math.isfinite(r["objective"])]
    if not pool:
        raise SingularSystem("every start")
    best = min(pool, key=lambda r: r["objective"])
    if not ok:
        log.warning("no hyperparameter start converged; returning best seen")
    theta = KernelParams(math.exp(best["x"][0]), math.exp(best["x"][1]))
    # record the jitter actually needed at the optimum
    _, _, jit = _factor(binned, theta, kernel)
    theta = KernelParams(theta.amplitude, theta.length_scale, jit)
    return FitResult(theta, best["objective"], bool(ok), runs)


# -- posterior ----------------------------------------------------------------

def trapezoid_weights(grid):
    h = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


@dataclass
class GpmeModel:
    """A fitted posterior over the log-density on a uniform grid on [0, 1].

    ``lam`` and ``cov`` are the posterior mean and covariance of the
    unnormalised log-intensity; ``density`` is the renormalised posterior
    predictive density on ``grid``.
    """

    grid: np.ndarray
    density: np.ndarray
    lam: np.ndarray
    cdiag: np.ndarray
    cov: np.ndarray | None = None
    binned: BinnedPit | None = None
    theta: KernelParams | None = None
    l0: float | None = None
    kernel_name: str = SquaredExponential.name
    a_norm: float | None = None
    renorm_correction: float = 1.0
    lam_bins: np.ndarray | None = None
    cov_bins: np.ndarray | None = None
    objective: float | None = None

    @property
    def n_total(self):
        return self.binned.n_total if self.binned is not None else None

    @property
    def time_range(self):
        return self.binned.time_range if self.binned is not None else None

    def predictive_density(self, f):
        return predictive_density(self, f)

    def gain_report(self):
        return gain_report(self)

    @classmethod
    def from_density(cls, density, grid_size=512, cov=None):
        """Wrap a known density (callable or grid values) as a model.

        Used for calibrated-limit checks and analytic comparisons; the
        covariance defaults to zero.
        """
        grid = np.linspace(0.0, 1.0, grid_size)
        d = np.asarray(density(grid) if callable(density) else density, dtype=float)
        d = d / (trapezoid_weights(grid) @ d)
        cov = np.zeros((grid_size, grid_size)) if cov is None else np.asarray(cov, dtype=float)
        return cls(grid=grid, density=d, lam=np.log(d), cdiag=np.diag(cov).copy(), cov=cov)


def bin_posterior(binned, theta, l0, kernel=KERNELS["squared-exponential"]):
    """Posterior mean and covariance at the bin centres, in both algebraic forms.

    Returns ``(lam_q, cov_q, lam_d, cov_d)``: the prediction form with the
    Gram matrix as cross-covariance, and the equivalent form written with
    the noise matrix D.
    """
    Q, cf, _ = _factor(binned, theta, kernel)
    D = np.diag(binned.noise)
    r = binned.l1 - l0
    alpha = linalg.cho_solve(cf, r, check_finite=False)
    lam_q = l0 + Q @ alpha
    cov_q = Q - Q @ linalg.cho_solve(cf, Q, check_finite=False)
    lam_d = binned.l1 - binned.noise * alpha
    cov_d = D - D @ linalg.cho_solve(cf, D, check_finite=False)
    return lam_q, cov_q, lam_d, cov_d


def posterior(binned, theta, l0=None, grid_size=512, kernel=KERNELS["squared-exponential"],
              full_covariance=True) -> GpmeModel:
    """Evaluate the posterior on a uniform grid and build the predictive density."""
    if l0 is None:
        l0 = l0_mle(binned, theta, kernel)
    x = binned.centers
    grid = np.linspace(0.0, 1.0, grid_size)
    _, cf, _ = _factor(binned, theta, kernel)
    alpha = linalg.cho_solve(cf, binned.l1 - l0, check_finite=False)
    kxg = kernel(x, grid, theta.amplitude, theta.length_scale)
    lam = l0 + kxg.T @ alpha
    v = linalg.solve_triangular(cf[0], kxg, lower=True, check_finite=False)
    if full_covariance:
        cov = kernel(grid, grid, theta.amplitude, theta.length_scale) - v.T @ v
        cov = 0.5 * (cov + cov.T)
        cdiag = np.clip(np.diag(cov).copy(), 0.0, None)
        np.fill_diagonal(cov, cdiag)
    else:
        cov = None
        cdiag = np.clip(theta.amplitude - np.einsum("ij,ij->j", v, v), 0.0, None)

    _, cov_b, lam_b, _ = bin_posterior(binned, theta, l0, kernel)
    cbb = np.clip(np.diag(cov_b), 0.0, None)
    a_norm = float(np.sum(binned.widths * np.exp(lam_b + 0.5 * cbb)))

    raw = np.exp(lam + 0.5 * cdiag) / a_norm
    correction = float(trapezoid_weights(grid) @ raw)
    return GpmeModel(
        grid=grid, density=raw / correction, lam=lam, cdiag=cdiag, cov=cov,
        binned=binned, theta=theta, l0=float(l0), kernel_name=kernel.name,
        a_norm=a_norm, renorm_correction=correction, lam_bins=lam_b, cov_bins=cov_b,
    )


def fit(series, target_count=8, grid_size=512, config=SearchConfig(),
        kernel=KERNELS["squared-exponential"]) -> GpmeModel:
    """Bin, fit hyperparameters and build the posterior in one call."""
    binned = series if isinstance(series, BinnedPit) else bin_pit(series, target_count)
    res = fit_hyperparams(binned, config, kernel)
    model = posterior(binned, res.theta, grid_size=grid_size, kernel=kernel)
    model.objective = res.objective
    return model


# -- functionals ----------------------------------------------------------------

def predictive_density(model, f):
    """Posterior predictive density at ``f``, linear between grid nodes.

    Linear interpolation keeps the density positive and makes its exact
    integral equal the trapezoid sum on the grid.
    """
    fv = np.clip(np.asarray(f, dtype=float), 0.0, 1.0)
    out = np.interp(fv, model.grid, model.density)
    return float(out) if np.ndim(f) == 0 else out


def ei(model) -> float:
    """Expected divergence of the true density from the predictive one (bits)."""
    w = trapezoid_weights(model.grid)
    return float(max(0.0, w @ (model.density * model.cdiag)) / (2.0 * LN2))


def _plogp(model):
    d = model.density
    return d * np.log2(d)


def delta_s_bar(model) -> float:
    """Predicted mean entropy-game winnings: KL of the predictive density from uniform."""
    w = trapezoid_weights(model.grid)
    return float(max(0.0, w @ _plogp(model)))


def var_delta_s(model) -> float:
    """Epistemic variance of the winnings, by 2-d trapezoid quadrature (bits^2)."""
    if model.cov is None:
        raise ValueError("model has no grid covariance; load the sidecar or refit")
    h = trapezoid_weights(model.grid) * _plogp(model)
    return max(0.0, float(_accel.var_quadrature(h, model.cov)))


def fam(model, dsb=None, var=None) -> float:
    dsb = delta_s_bar(model) if dsb is None else dsb
    var = var_delta_s(model) if var is None else var
    if var <= 0.0:
        raise UndefinedFAM("Var(dS) = 0: forecast advantage measure undefined")
    return dsb / math.sqrt(var)


def delta_s_true_oracle(pit_density_true, model) -> float:
    """Realised expected winnings when the true PIT density is known (bits)."""
    w = trapezoid_weights(model.grid)
    t = np.asarray(pit_density_true(model.grid), dtype=float)
    return float(w @ (t * np.log2(model.density)))


def sample_normalizer(model, n_draws=2000, seed=0):
    """Monte-Carlo draws of the integral of exp(L) under the grid posterior."""
    vals, vecs = np.linalg.eigh(model.cov)
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    rng = np.random.default_rng(seed)
    draws = model.lam[None, :] + rng.standard_normal((n_draws, vals.size)) @ root.T
    return np.exp(draws) @ trapezoid_weights(model.grid)


@dataclass(frozen=True)
class GainReport:
    ei: float
    delta_s_bar: float
    var_delta_s: float
    fam: float | None
    n_bins: int | None
    n_total: int | None

    @property
    def ei_asymptote(self):
        """Large-N limit of EI in bits, B / (2 N ln 2)."""
        if not self.n_bins or not self.n_total:
            return None
        return self.n_bins / (2.0 * self.n_total * LN2)

    def to_json(self):
        return {"EI": self.ei, "delta_s_bar": self.delta_s_bar, "var_delta_s": self.var_delta_s,
                "fam": self.fam, "B": self.n_bins, "N": self.n_total,
                "ei_asymptote": self.ei_asymptote}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["EI"], obj["delta_s_bar"], obj["var_delta_s"], obj.get("fam"),
                   obj.get("B"), obj.get("N"))


def gain_report(model) -> GainReport:
    dsb = delta_s_bar(model)
    var = var_delta_s(model)
    try:
        f = fam(model, dsb, var)
    except UndefinedFAM:
        f = None
    b = model.binned
    return GainReport(ei(model), dsb, var, f, b.n_bins if b else None, b.n_total if b else None)


# -- persistence ------------------------------------------------------------------

def save_model(model, path, write_covariance=True, report=None):
    """Write the model JSON and (optionally) a little-endian float64 covariance sidecar."""
    path = os.fspath(path)
    sidecar = None
    if write_covariance and model.cov is not None:
        sidecar = os.path.splitext(path)[0] + ".cov.f64"
        model.cov.astype("<f8").tofile(sidecar)
    if report is None and model.cov is not None:
        report = gain_report(model)
    b = model.binned
    doc = {
        "format": "pitrecal-gpme/1",
        "kernel": model.kernel_name,
        "bin_edges": b.edges.tolist() if b else None,
        "counts": b.counts.tolist() if b else None,
        "train_time_range": list(b.time_range) if b and b.time_range else None,
        "theta": {"amplitude": model.theta.amplitude, "length_scale": model.theta.length_scale}
        if model.theta else None,
        "jitter": model.theta.jitter if model.theta else 0.0,
        "l0": model.l0,
        "objective": model.objective,
        "grid": model.grid.tolist(),
        "lambda": model.lam.tolist(),
        "c_diag": model.cdiag.tolist(),
        "density": model.density.tolist(),
        "A_norm": model.a_norm,
        "renorm_correction": model.renorm_correction,
        "covariance_file": os.path.basename(sidecar) if sidecar else None,
        "gain_report": report.to_json() if report else None,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
    return doc


def load_model(path, load_covariance=True) -> GpmeModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "pitrecal-gpme/1":
        raise ValueError(f"{path}: not a pitrecal model file")
    grid = np.array(doc["grid"], dtype=float)
    cov = None
    if load_covariance and doc.get("covariance_file"):
        side = os.path.join(os.path.dirname(os.fspath(path)), doc["covariance_file"])
        if os.path.exists(side):
            cov = np.fromfile(side, dtype="<f8").reshape(grid.size, grid.size).astype(float)
    binned = None
    if doc.get("bin_edges") is not None:
        tr = doc.get("train_time_range")
        binned = BinnedPit(np.array(doc["bin_edges"]), np.array(doc["counts"]),
                           tuple(tr) if tr else None)
    theta = None
    if doc.get("theta"):
        theta = KernelParams(doc["theta"]["amplitude"], doc["theta"]["length_scale"],
                             doc.get("jitter", 0.0))
    model = GpmeModel(
        grid=grid, density=np.array(doc["density"]), lam=np.array(doc["lambda"]),
        cdiag=np.array(doc["c_diag"]), cov=cov, binned=binned, theta=theta, l0=doc.get("l0"),
        kernel_name=doc.get("kernel", SquaredExponential.name), a_norm=doc.get("A_norm"),
        renorm_correction=doc.get("renorm_correction", 1.0), objective=doc.get("objective"),
    )
    model.stored_report = GainReport.from_json(doc["gain_report"]) if doc.get("gain_report") else None
    return model
