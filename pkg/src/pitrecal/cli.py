"""Command-line pipeline: pit, thin, fit, recalibrate, game, simulate, report."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .archive import (ScoringError, SchemaError, fmt, read_foa, read_pit_csv, write_foa,
                      write_pit_csv, pit)
from .game import OverlapError, play, write_game_csv, write_summary_json
from .gpme import DegenerateBinning, fit, load_model, save_model
from .recalibrate import DEFAULT_KNOTS, PitMap, recalibrate_archive
from .thinning import autocorrelation, thin

log = logging.getLogger("pitrecal")

DEFAULT_SEED = 20240917


class CliError(Exception):
    pass


def _need(path):
    if not Path(path).is_file():
        raise CliError(f"no such file: {path}")
    return path


def _parent(path):
    parent = Path(path).parent
    if not parent.is_dir():
        raise CliError(f"output directory does not exist: {parent}")
    return path


# -- commands -----------------------------------------------------------------

def cmd_pit(args):
    series = pit(read_foa(_need(args.foa)))
    write_pit_csv(series, _parent(args.out))
    log.info("wrote %d PIT values to %s (%d clamped)", len(series), args.out, series.n_clamped)


def cmd_thin(args):
    series = read_pit_csv(_need(args.pit))
    report = autocorrelation(series, args.max_lag, args.max_factor)
    factor = report.suggested_factor
    if args.factor is not None:
        if args.factor < factor:
            log.warning("thinning factor %d is below the suggested %d; residual correlation "
                        "may bias the fit", args.factor, factor)
        factor = args.factor
    prefix = args.out or str(Path(args.pit).with_suffix(""))
    _parent(prefix)
    report.to_csv(prefix + ".acf.csv")
    write_pit_csv(thin(series, factor, args.offset), prefix + ".thinned.csv")
    print(json.dumps({"suggested_factor": report.suggested_factor, "factor_used": factor,
                      "noise_band": report.noise_band}))


def cmd_fit(args):
    series = read_pit_csv(_need(args.pit))
    _parent(args.out)
    model = fit(series, target_count=args.target_count, grid_size=args.grid)
    report = model.gain_report()
    save_model(model, args.out, write_covariance=not args.no_covariance, report=report)
    with open(os.path.splitext(args.out)[0] + ".report.json", "w") as fh:
        json.dump(report.to_json(), fh, indent=1)
    print(json.dumps(report.to_json()))


def cmd_recalibrate(args):
    archive = read_foa(_need(args.foa))
    model = load_model(_need(args.model), load_covariance=False)
    out = recalibrate_archive(archive, model, as_grid=True, knots=args.knots)
    write_foa(out, _parent(args.out))


def cmd_game(args):
    archive = read_foa(_need(args.foa))
    model = load_model(_need(args.model))
    _parent(args.out)
    summary = play(archive, model)
    write_game_csv(summary, args.out + ".csv")
    write_summary_json(summary, args.out + ".summary.json")
    print(json.dumps(summary.check or {}))


def _simulate(scenario, n, seed):
    kind = scenario.pop("type", None)
    t0 = int(scenario.pop("t0", 0))
    if kind == "gaussian-pair":
        from .synth.gaussian_pair import GaussianPairScenario, gaussian_pair_foa

        return gaussian_pair_foa(GaussianPairScenario(**scenario), n, seed, t0)
    if kind == "moore-spiegel":
        from .synth.circuit import EnsembleForecastConfig, make_circuit_foa

        archive = make_circuit_foa(EnsembleForecastConfig(**scenario), n, seed)
    elif kind == "enso-like":
        from .synth.enso import EnsoConfig, make_enso_like_foa

        scenario.setdefault("n_train", 36)
        scenario["n_records"] = scenario["n_train"] + n
        archive = make_enso_like_foa(EnsoConfig.from_json(scenario), seed)
    else:
        raise CliError(f"unknown scenario type {kind!r}")
    if t0:
        from .archive import ForecastObservationArchive, ForecastRecord

        archive = ForecastObservationArchive(
            ForecastRecord(r.time_index + t0, r.observation, r.forecast, r.metadata) for r in archive)
    return archive


def cmd_simulate(args):
    with open(_need(args.scenario)) as fh:
        scenario = json.load(fh)
    if not isinstance(scenario, dict):
        raise CliError("scenario must be a JSON object")
    write_foa(_simulate(dict(scenario), args.n, args.seed), _parent(args.out))


def _hist_csv(path, values, bins=20, lo=0.0, hi=1.0, extra=None):
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    with open(path, "w") as fh:
        cols = ["lo", "hi", "count"] + list(extra or {})
        fh.write(",".join(cols) + "\n")
        for i, c in enumerate(counts):
            row = [fmt(edges[i]), fmt(edges[i + 1]), str(int(c))]
            row += [fmt(v[i]) for v in (extra or {}).values()]
            fh.write(",".join(row) + "\n")


def cmd_report(args):
    out = Path(args.out)
    if not out.is_dir():
        out.mkdir(parents=True)
    models = [load_model(_need(p)) for p in args.model]
    main = models[0]
    with open(out / "density.csv", "w") as fh:
        fh.write("f,density,lambda,c_diag\n")
        for row in zip(main.grid, main.density, main.lam, main.cdiag):
            fh.write(",".join(fmt(v) for v in row) + "\n")

    with open(out / "scaling.csv", "w") as fh:
        fh.write("N,B,EI,EI_asymptote,delta_s_bar,var_delta_s,fam\n")
        for m in models:
            r = m.gain_report() if m.cov is not None else m.stored_report
            if r is None:
                raise CliError("model has neither covariance nor a stored gain report")
            vals = [r.n_total, r.n_bins, r.ei, r.ei_asymptote, r.delta_s_bar, r.var_delta_s, r.fam]
            fh.write(",".join("" if v is None else (str(v) if isinstance(v, int) else fmt(v))
                              for v in vals) + "\n")

    if args.game:
        import csv

        with open(_need(args.game), newline="") as fh:
            rows = list(csv.DictReader(fh))
        f = np.array([float(r["f"]) for r in rows])
        w = np.array([float(r["w"]) for r in rows])
        g = PitMap(main.grid, main.density)(f)
        _hist_csv(out / "pit_hist_raw.csv", f)
        _hist_csv(out / "pit_hist_recalibrated.csv", g)
        r = main.gain_report() if main.cov is not None else main.stored_report
        counts, edges = np.histogram(w, bins=40)
        with open(out / "winnings_hist.csv", "w") as fh:
            fh.write("lo,hi,count\n")
            for i, c in enumerate(counts):
                fh.write(f"{fmt(edges[i])},{fmt(edges[i + 1])},{int(c)}\n")
        with open(out / "winnings_bands.json", "w") as fh:
            sd = float(np.sqrt(r.var_delta_s)) if r else None
            json.dump({"mean_winnings": float(w.mean()),
                       "delta_s_bar": r.delta_s_bar if r else None,
                       "band_lo": r.delta_s_bar - sd if r else None,
                       "band_hi": r.delta_s_bar + sd if r else None}, fh, indent=1)


# -- entry point ------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="pitrecal", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("pit", help="PIT values of a forecast archive")
    s.add_argument("--foa", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_pit)

    s = sub.add_parser("thin", help="autocorrelation report and thinned PIT series")
    s.add_argument("--pit", required=True)
    s.add_argument("--max-lag", type=int, default=40)
    s.add_argument("--max-factor", type=int, default=20)
    s.add_argument("--factor", type=int, help="override the suggested factor")
    s.add_argument("--offset", type=int, default=0)
    s.add_argument("--out", help="output prefix (default: the PIT path without suffix)")
    s.set_defaults(func=cmd_thin)

    s = sub.add_parser("fit", help="fit the PIT density model")
    s.add_argument("--pit", required=True)
    s.add_argument("--target-count", type=int, default=8)
    s.add_argument("--grid", type=int, default=512)
    s.add_argument("--no-covariance", action="store_true", help="skip the covariance sidecar")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("recalibrate", help="write recalibrated forecasts as grid cdfs")
    s.add_argument("--foa", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--knots", type=int, default=DEFAULT_KNOTS)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_recalibrate)

    s = sub.add_parser("game", help="play the entropy game on a test archive")
    s.add_argument("--foa", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--out", required=True, help="output prefix")
    s.set_defaults(func=cmd_game)

    s = sub.add_parser("simulate", help="generate a synthetic archive from a scenario file")
    s.add_argument("--scenario", required=True)
    s.add_argument("--n", type=int, default=2048)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("report", help="plot-data CSVs")
    s.add_argument("--model", required=True, action="append",
                   help="model file; repeat to tabulate several training sizes")
    s.add_argument("--game", help="game CSV from the game command")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_report)
    return p


def _error_json(exc):
    doc = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, SchemaError) and exc.line is not None:
        doc["line"] = exc.line
    if isinstance(exc, ScoringError) and exc.time_index is not None:
        doc["time_index"] = exc.time_index
    return json.dumps(doc)


def main(argv=None):
    level = getattr(logging, os.environ.get("RECAL_LOG", "WARNING").upper(), logging.WARNING)
    logging.basicConfig(level=level,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (CliError, SchemaError, ScoringError, OverlapError, DegenerateBinning,
            ValueError, OSError, TypeError, KeyError) as exc:
        print(_error_json(exc), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
