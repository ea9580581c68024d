"""Synthetic forecast-observation archives with known structure."""

from .gaussian_pair import GaussianPairScenario, gaussian_pair_foa, gaussian_pair_pit_density

__all__ = ["GaussianPairScenario", "gaussian_pair_foa", "gaussian_pair_pit_density"]
