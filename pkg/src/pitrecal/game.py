"""The entropy game between a published and a recalibrated forecaster."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .archive import ForecastObservationArchive, fmt, pit
from .gpme import GainReport, GpmeModel, gain_report, predictive_density

HIST_BINS = 40


class OverlapError(ValueError):
    """Test records fall inside the model's training time range."""


@dataclass(frozen=True)
class GameRound:
    time_index: int
    observation: float
    pit: float
    winnings: float  # bits won by the recalibrated player


@dataclass
class GameSummary:
    rounds: list
    mean_winnings: float
    sample_sd: float
    hist_edges: np.ndarray
    hist_counts: np.ndarray
    predicted: GainReport | None
    kelly_wealth_log2: float
    check: dict = field(default_factory=dict)

    @property
    def n_rounds(self):
        return len(self.rounds)

    @property
    def winnings(self):
        return np.array([r.winnings for r in self.rounds])

    @property
    def published_total(self):
        # zero-sum: the published player loses what the recalibrated one wins
        return -self.kelly_wealth_log2

    def to_json(self):
        return {
            "n_rounds": self.n_rounds,
            "mean_winnings": self.mean_winnings,
            "sample_sd": self.sample_sd,
            "kelly_wealth_log2": self.kelly_wealth_log2,
            "kelly_factor": kelly_wealth_factor(self),
            "histogram": {"edges": self.hist_edges.tolist(), "counts": self.hist_counts.tolist()},
            "gain_report": self.predicted.to_json() if self.predicted else None,
            "prediction_check": self.check or None,
        }


def _check_disjoint(archive, model):
    tr = model.time_range
    if tr is None or len(archive) == 0:
        return
    t = archive.time_index
    clash = t[(t >= tr[0]) & (t <= tr[1])]
    if clash.size:
        raise OverlapError(
            f"{clash.size} test records inside training range [{tr[0]}, {tr[1]}] (first t={int(clash[0])})"
        )


def play(archive_test: ForecastObservationArchive, model: GpmeModel, report=None) -> GameSummary:
    """Score every test record with w = log2 pi(f) and summarise.

    ``report`` supplies the a-priori prediction; it defaults to the
    model's own gain report.
    """
    if len(archive_test) == 0:
        raise ValueError("test archive is empty")
    _check_disjoint(archive_test, model)
    ps = pit(archive_test)
    w = np.log2(predictive_density(model, ps.values))
    rounds = [GameRound(int(t), float(x), float(f), float(v))
              for t, x, f, v in zip(ps.time_index, archive_test.observations, ps.values, w)]
    eps = 1e-9 * max(1.0, float(np.max(np.abs(w))))
    counts, edges = np.histogram(w, bins=HIST_BINS, range=(w.min() - eps, w.max() + eps))
    if report is None:
        report = getattr(model, "stored_report", None) if model.cov is None else gain_report(model)
    summary = GameSummary(
        rounds=rounds,
        mean_winnings=float(np.mean(w)),
        sample_sd=float(np.std(w, ddof=1)) if w.size > 1 else 0.0,
        hist_edges=edges,
        hist_counts=counts,
        predicted=report,
        kelly_wealth_log2=float(np.sum(w)),
    )
    if report is not None:
        summary.check = prediction_check(summary)
    return summary


def kelly_wealth_factor(summary) -> float:
    """Per-round wealth multiplier 2^mean for a Kelly bettor."""
    mean = summary if isinstance(summary, (int, float)) else summary.mean_winnings
    return 2.0 ** mean


def prediction_check(summary: GameSummary, threshold=3.0) -> dict:
    """z-score of the realised mean against the a-priori prediction.

    The denominator adds the model's epistemic variance to the sampling
    variance of the test mean.
    """
    p = summary.predicted
    if p is None:
        raise ValueError("summary has no prediction attached")
    sd = math.sqrt(p.var_delta_s + summary.sample_sd ** 2 / summary.n_rounds)
    diff = summary.mean_winnings - p.delta_s_bar
    z = 0.0 if diff == 0 else (diff / sd if sd > 0 else math.copysign(math.inf, diff))
    return {"z_score": z, "verdict": "pass" if abs(z) <= threshold else "fail", "sigma": sd}


def write_game_csv(summary: GameSummary, path):
    with open(path, "w") as fh:
        fh.write("t,x,f,w\n")
        for r in summary.rounds:
            fh.write(f"{r.time_index},{fmt(r.observation)},{fmt(r.pit)},{fmt(r.winnings)}\n")


def write_summary_json(summary: GameSummary, path):
    with open(path, "w") as fh:
        json.dump(summary.to_json(), fh, indent=1)
