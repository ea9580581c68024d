"""Recalibration of probabilistic forecasts from their PIT history."""

__version__ = "0.1.0"

from ._accel import BACKEND  # noqa: E402
from .archive import ForecastObservationArchive, ForecastRecord, PitSeries, ignorance, pit  # noqa: E402
from .distributions import GaussianMixture, GridCdf, normal  # noqa: E402
from .gpme import GainReport, GpmeModel, bin_pit, fit  # noqa: E402
from .recalibrate import RecalibratedForecast, recalibrate  # noqa: E402

__all__ = [
    "BACKEND", "ForecastObservationArchive", "ForecastRecord", "PitSeries", "ignorance", "pit",
    "GaussianMixture", "GridCdf", "normal", "GainReport", "GpmeModel", "bin_pit", "fit",
    "RecalibratedForecast", "recalibrate",
]
