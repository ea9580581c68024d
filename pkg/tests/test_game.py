import json
import math

import numpy as np
import pytest

from pitrecal import gpme
from pitrecal.archive import pit
from pitrecal.game import (HIST_BINS, OverlapError, kelly_wealth_factor, play, prediction_check,
                           write_game_csv, write_summary_json)
from pitrecal.recalibrate import recalibrate
from pitrecal.synth.gaussian_pair import GaussianPairScenario, gaussian_pair_foa


@pytest.fixture(scope="module")
def trained():
    s = GaussianPairScenario()
    m = gpme.fit(pit(gaussian_pair_foa(s, 4096, seed=11)))
    test = gaussian_pair_foa(s, 2048, seed=12, t0=4096)
    return m, test


def test_flat_model_pays_nothing():
    flat = gpme.GpmeModel.from_density(np.ones(512))
    arch = gaussian_pair_foa(GaussianPairScenario(), 200, seed=3)
    s = play(arch, flat)
    assert np.all(s.winnings == 0.0) and s.mean_winnings == 0.0


def test_summary_identities(trained):
    m, test = trained
    s = play(test, m)
    w = s.winnings
    assert s.n_rounds == 2048
    assert s.mean_winnings == pytest.approx(w.sum() / w.size, rel=1e-15)
    assert s.kelly_wealth_log2 == pytest.approx(w.sum(), rel=1e-15)
    assert s.published_total == -s.kelly_wealth_log2
    assert s.hist_counts.sum() == 2048 and s.hist_counts.size == HIST_BINS


def test_round_winnings_are_log_ratios(trained):
    m, test = trained
    s = play(test, m)
    for r, rec in list(zip(s.rounds, test))[:50]:
        rf = recalibrate(rec.forecast, m)
        x = rec.observation
        assert r.winnings == pytest.approx(math.log2(rf.pdf(x) / rec.forecast.pdf(x)), abs=1e-12)


def test_pair_winnings_match_prediction(trained):
    m, test = trained
    s = play(test, m)
    assert s.mean_winnings > 0
    assert s.check["verdict"] == "pass"
    sigma = math.sqrt(s.predicted.var_delta_s + s.sample_sd ** 2 / s.n_rounds)
    assert s.check["sigma"] == pytest.approx(sigma)
    assert abs(s.check["z_score"]) <= 3


def test_kelly_factor():
    assert kelly_wealth_factor(0.6) == pytest.approx(1.5157, abs=1e-4)
    assert kelly_wealth_factor(0.0) == 1.0
    assert kelly_wealth_factor(0.2) == pytest.approx(1.149, abs=1e-3)
    assert kelly_wealth_factor(0.6) == pytest.approx(1.516, abs=1e-3)


def test_z_zero_when_mean_matches(trained):
    m, test = trained
    s = play(test, m)
    s.mean_winnings = s.predicted.delta_s_bar
    assert prediction_check(s)["z_score"] == 0.0


def test_wrong_model_is_flagged(trained):
    m, _ = trained
    other = gaussian_pair_foa(GaussianPairScenario(0.0, 1.0, -0.4, 0.7), 2048, seed=13, t0=5000)
    s = play(other, m)
    assert abs(s.check["z_score"]) > 3 and s.check["verdict"] == "fail"


def test_overdispersed_histogram_shape():
    s = GaussianPairScenario(0.0, 1.0, 0.0, 2.0)
    m = gpme.fit(pit(gaussian_pair_foa(s, 4096, seed=21)))
    g = play(gaussian_pair_foa(s, 4096, seed=22, t0=4096), m)
    top = math.log2(m.density.max())
    bottom = math.log2(m.density.min())
    k = int(np.argmax(g.hist_counts))
    width = g.hist_edges[1] - g.hist_edges[0]
    # mode sits at the cutoff, the left tail stretches toward the density floor
    assert g.hist_edges[k + 1] >= top - 2 * width
    assert g.winnings.max() <= top + 1e-12
    assert g.winnings.min() < 0.5 * bottom


def test_overlap_refused(trained):
    m, _ = trained
    clash = gaussian_pair_foa(GaussianPairScenario(), 10, seed=1, t0=4000)
    with pytest.raises(OverlapError):
        play(clash, m)


def test_empty_and_missing_prediction(trained):
    m, test = trained
    with pytest.raises(ValueError):
        play(test[:0], m)
    s = play(test, m)
    s.predicted = None
    with pytest.raises(ValueError):
        prediction_check(s)


def test_outputs(tmp_path, trained):
    m, test = trained
    s = play(test, m)
    write_game_csv(s, tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "t,x,f,w" and len(lines) == 2049
    t, x, f, w = lines[1].split(",")
    assert float(w) == s.rounds[0].winnings and int(t) == s.rounds[0].time_index
    write_summary_json(s, tmp_path / "g.json")
    doc = json.loads((tmp_path / "g.json").read_text())
    assert doc["kelly_factor"] == pytest.approx(2 ** s.mean_winnings)
    assert doc["gain_report"]["delta_s_bar"] == s.predicted.delta_s_bar
