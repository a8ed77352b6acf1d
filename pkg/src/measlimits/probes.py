"""Probe (apparatus) wavefunctions sampled on grids."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import OutcomeGrid

SHAPES = ("gaussian", "uniform", "two-peak")


@dataclass(frozen=True)
class Probe:
    """Real, centered probe amplitude.

    ``width`` is the standard deviation of ``|phi|^2`` for the Gaussian and the
    two Gaussian lobes, and the full support width for the uniform shape.
    """

    shape: str = "gaussian"
    width: float = 1.0
    separation: float = 0.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown probe shape {self.shape!r}; expected one of {SHAPES}")
        if not self.width > 0:
            raise ValueError("probe width must be positive")

    def amplitude(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.shape == "gaussian":
            return np.exp(-(x**2) / (4 * self.width**2))
        if self.shape == "uniform":
            return (np.abs(x) <= self.width / 2 + 1e-12).astype(float)
        s = self.separation / 2
        return np.exp(-((x - s) ** 2) / (4 * self.width**2)) + np.exp(-((x + s) ** 2) / (4 * self.width**2))

    def sample(self, g: OutcomeGrid) -> np.ndarray:
        v = self.amplitude(g.points).astype(complex)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise ValueError("probe is not normalizable on this grid (no support on grid points)")
        return v / nrm

    def density(self, x) -> np.ndarray:
        """Unnormalized ``|phi(x)|^2``."""
        return np.abs(self.amplitude(x)) ** 2
