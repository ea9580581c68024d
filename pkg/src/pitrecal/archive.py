"""Forecast-observation archives, PIT series and ignorance scoring."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .distributions import ForecastDistribution, InvalidDistribution, from_json

log = logging.getLogger(__name__)

PIT_EPS = 1e-12


class SchemaError(ValueError):
    """A malformed archive line; ``line`` is 1-based."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ScoringError(ValueError):
    def __init__(self, message, time_index=None):
        super().__init__(message)
        self.time_index = time_index


@dataclass(frozen=True)
class ForecastRecord:
    time_index: int
    observation: float
    forecast: ForecastDistribution
    metadata: Mapping = field(default_factory=dict)


class ForecastObservationArchive(Sequence):
    """Ordered (time_index, observation, forecast) records.

    Time indices must be strictly increasing. The ``metadata`` mapping of
    each record is carried along untouched.
    """

    def __init__(self, records: Iterable[ForecastRecord]):
        self._records = tuple(records)
        t = [r.time_index for r in self._records]
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError("time_index must be strictly increasing")
        for r in self._records:
            if not isinstance(r.forecast, ForecastDistribution):
                raise TypeError("forecast must be a ForecastDistribution")
            if not math.isfinite(r.observation):
                raise ValueError(f"non-finite observation at t={r.time_index}")

    def __len__(self):
        return len(self._records)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return ForecastObservationArchive(self._records[i])
        return self._records[i]

    def __repr__(self):
        return f"ForecastObservationArchive(n={len(self)})"

    @property
    def time_index(self):
        return np.array([r.time_index for r in self._records], dtype=np.int64)

    @property
    def observations(self):
        return np.array([r.observation for r in self._records], dtype=float)

    @property
    def forecasts(self):
        return [r.forecast for r in self._records]

    def split(self, n_first):
        """Split into the first ``n_first`` records and the remainder."""
        return self[:n_first], self[n_first:]

    def select(self, mask_or_index):
        idx = np.arange(len(self))[mask_or_index]
        return ForecastObservationArchive(self._records[i] for i in idx)

    @classmethod
    def from_arrays(cls, time_index, observations, forecasts, metadata=None):
        metadata = metadata if metadata is not None else [{}] * len(observations)
        return cls(
            ForecastRecord(int(t), float(x), f, m)
            for t, x, f, m in zip(time_index, observations, forecasts, metadata)
        )


@dataclass(frozen=True)
class PitSeries:
    """PIT values in [0, 1] aligned with their source time indices."""

    values: np.ndarray
    time_index: np.ndarray
    n_clamped: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        t = np.asarray(self.time_index, dtype=np.int64)
        if v.shape != t.shape or v.ndim != 1:
            raise ValueError("values and time_index must be equal-length 1-d arrays")
        if np.any(~np.isfinite(v)) or np.any((v < 0) | (v > 1)):
            raise ValueError("PIT values must lie in [0, 1]")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "time_index", t)

    def __len__(self):
        return self.values.size

    @classmethod
    def from_values(cls, values, time_index=None):
        values = np.asarray(values, dtype=float)
        if time_index is None:
            time_index = np.arange(values.size)
        return cls(values, time_index)


def cdf_eval(d: ForecastDistribution, x):
    """Forecast cdf at ``x``; tails saturate at 0 and 1."""
    return d.cdf(x)


def pit(archive: ForecastObservationArchive, eps=PIT_EPS) -> PitSeries:
    """PIT of every record, clamped into ``[eps, 1 - eps]``.

    The number of clamped values (observations outside the forecast's
    numerical support) is stored on the result and logged.
    """
    if len(archive) == 0:
        raise ValueError("archive is empty")
    f = np.array([r.forecast.cdf(r.observation) for r in archive], dtype=float)
    clamped = int(np.count_nonzero((f < eps) | (f > 1.0 - eps)))
    if clamped:
        log.warning("%d PIT values clamped to [%g, 1 - %g]", clamped, eps, eps)
    return PitSeries(np.clip(f, eps, 1.0 - eps), archive.time_index, clamped)


def log2_density_at_obs(archive: ForecastObservationArchive):
    """log2 p_n(x_n) for every record; raises ScoringError on a zero density."""
    out = np.empty(len(archive))
    for i, r in enumerate(archive):
        p = r.forecast.pdf(r.observation)
        if not p > 0 or not math.isfinite(p):
            raise ScoringError(
                f"forecast density {p!r} at observation of record t={r.time_index}",
                r.time_index,
            )
        out[i] = math.log2(p)
    return out


def ignorance(archive: ForecastObservationArchive, clim: ForecastDistribution) -> float:
    """Empirical ignorance score in bits relative to a climatology."""
    if len(archive) == 0:
        raise ValueError("archive is empty")
    lp = log2_density_at_obs(archive)
    pc = np.atleast_1d(clim.pdf(archive.observations))
    if np.any(pc <= 0):
        bad = int(archive.time_index[np.argmax(pc <= 0)])
        raise ScoringError(f"climatology density is zero at record t={bad}", bad)
    return float(-np.mean(lp - np.log2(pc)))


def ignorance_difference(archive, recalibrated_archive) -> float:
    """Ign[recalibrated] - Ign[published]; the climatology cancels."""
    if len(archive) != len(recalibrated_archive):
        raise ValueError("archives are not aligned")
    if np.any(archive.time_index != recalibrated_archive.time_index):
        raise ValueError("archives are not aligned")
    if archive is recalibrated_archive:
        return 0.0
    return float(-np.mean(log2_density_at_obs(recalibrated_archive) - log2_density_at_obs(archive)))


# -- file formats -----------------------------------------------------------

def read_foa(path_or_lines) -> ForecastObservationArchive:
    """Read a JSON-lines archive (path or iterable of lines)."""
    if isinstance(path_or_lines, (str, bytes)) or hasattr(path_or_lines, "__fspath__"):
        with open(path_or_lines) as fh:
            return read_foa(fh.readlines())
    records = []
    for lineno, line in enumerate(path_or_lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON ({exc.msg})", lineno) from None
        try:
            t = obj["t"]
            x = obj["x"]
            fc = obj["forecast"]
        except (KeyError, TypeError):
            raise SchemaError("record needs keys 't', 'x' and 'forecast'", lineno) from None
        if not isinstance(t, int) or isinstance(t, bool):
            raise SchemaError("'t' must be an integer", lineno)
        if not isinstance(x, (int, float)) or isinstance(x, bool) or not math.isfinite(x):
            raise SchemaError("'x' must be a finite number", lineno)
        try:
            dist = from_json(fc)
        except (InvalidDistribution, KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad forecast: {exc}", lineno) from None
        if records and t <= records[-1].time_index:
            raise SchemaError("'t' must be strictly increasing", lineno)
        records.append(ForecastRecord(t, float(x), dist, obj.get("meta", {}) or {}))
    return ForecastObservationArchive(records)


def foa_lines(archive: ForecastObservationArchive):
    for r in archive:
        obj = {"t": int(r.time_index), "x": float(r.observation), "forecast": r.forecast.to_json()}
        if r.metadata:
            obj["meta"] = dict(r.metadata)
        yield json.dumps(obj, separators=(",", ":"))


def write_foa(archive: ForecastObservationArchive, path):
    with open(path, "w") as fh:
        for line in foa_lines(archive):
            fh.write(line + "\n")


def fmt(x) -> str:
    return format(float(x), ".17g")


def write_pit_csv(series: PitSeries, path_or_buffer):
    buf = io.StringIO()
    buf.write("t,f\n")
    for t, f in zip(series.time_index, series.values):
        buf.write(f"{int(t)},{fmt(f)}\n")
    if hasattr(path_or_buffer, "write"):
        path_or_buffer.write(buf.getvalue())
    else:
        with open(path_or_buffer, "w") as fh:
            fh.write(buf.getvalue())


def read_pit_csv(path) -> PitSeries:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "f" not in reader.fieldnames:
            raise SchemaError("PIT CSV needs a header with column 'f'", 1)
        t, f = [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                f.append(float(row["f"]))
                t.append(int(row["t"]) if row.get("t") not in (None, "") else len(t))
            except ValueError:
                raise SchemaError("unparseable PIT row", lineno) from None
    try:
        return PitSeries(np.array(f), np.array(t, dtype=np.int64))
    except ValueError as exc:
        raise SchemaError(str(exc)) from None
