"""Time-sampled perturbation fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .collision import DistributionField, PerturbationField
from .errors import InputError
from .phase_space import SpatialDomain, VelocityGrid


@dataclass
class Trajectory:
    """f(t_k, x, v) at stored times; ``values`` has shape (n_times, n_cells, n^3)."""

    times: np.ndarray
    values: np.ndarray
    grid: VelocityGrid
    domain: SpatialDomain

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.times.size, self.domain.n_cells, self.grid.size):
            raise InputError(f"trajectory shape {self.values.shape} inconsistent with "
                             f"{self.times.size} times, {self.domain.n_cells} cells, {self.grid.size} nodes")

    @classmethod
    def constant(cls, f: PerturbationField, times) -> "Trajectory":
        times = np.asarray(times, dtype=float)
        vals = np.broadcast_to(f.values, (times.size,) + f.values.shape).copy()
        return cls(times, vals, f.grid, f.domain)

    @classmethod
    def zeros(cls, times, grid: VelocityGrid, domain: SpatialDomain) -> "Trajectory":
        times = np.asarray(times, dtype=float)
        return cls(times, np.zeros((times.size, domain.n_cells, grid.size)), grid, domain)

    @property
    def n_times(self) -> int:
        return self.times.size

    def at(self, k: int) -> PerturbationField:
        return PerturbationField(self.values[k], self.grid, self.domain, float(self.times[k]))

    def distribution(self, k: int) -> DistributionField:
        return self.at(k).to_distribution()

    def F(self) -> np.ndarray:
        """F = mu + sqrt(mu) f at every stored time."""
        return self.grid.mu + self.grid.sqrt_mu * self.values

    def window_mask(self, window=None, atol: float = 1e-12) -> np.ndarray:
        if window is None:
            return np.ones(self.n_times, dtype=bool)
        t0, t1 = window
        return (self.times >= t0 - atol) & (self.times <= t1 + atol)

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        return Trajectory(self.times, self.values - other.values, self.grid, self.domain)
