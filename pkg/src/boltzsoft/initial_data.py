"""Named initial-data families.

All families return a :class:`PerturbationField` whose distribution
F0 = mu + sqrt(mu) f0 is positive.  Stochastic families require an explicit
seed and draw from their own ``numpy.random.Generator``.
"""

from __future__ import annotations

import math

import numpy as np

from .collision import PerturbationField
from .errors import InputError
from .norms import WeightSpec, norm_lp_v_linf_x
from .phase_space import SpatialDomain, VelocityGrid, maxwellian

FAMILIES = ("zero", "gaussian-bump", "bimodal", "random-smooth")


def _modulation(domain: SpatialDomain, depth: float, phase: float = 0.0) -> np.ndarray:
    """1 + depth cos(2 pi x1 / P1 + phase) at the cell centres (1 in homogeneous mode)."""
    if domain.mode == "homogeneous":
        return np.ones(1)
    x = domain.centers()[:, 0]
    return 1.0 + depth * np.cos(2.0 * math.pi * x / domain.periods[0] + phase)


def zero(grid: VelocityGrid, domain: SpatialDomain | None = None) -> PerturbationField:
    return PerturbationField.zeros(grid, domain)


def gaussian_bump(grid: VelocityGrid, domain: SpatialDomain | None = None, *,
                  target_norm: float | None = None, spec: WeightSpec | None = None,
                  epsilon: float = 0.1, center=(1.0, 0.0, 0.0), depth: float = 0.5) -> PerturbationField:
    """F0 = mu + eps mu(v - c) (1 + depth cos(2 pi x1/P1)).

    With ``target_norm`` the amplitude is chosen so that
    ||w_beta f0||_{L^p_v L^inf_x} equals it (``spec`` supplies beta and p).
    """
    domain = SpatialDomain() if domain is None else domain
    if epsilon < 0 or (target_norm is not None and target_norm < 0):
        raise InputError("bump amplitude must be nonnegative")
    if not 0 <= depth < 1:
        raise InputError("modulation depth must lie in [0, 1)")
    c = np.asarray(center, dtype=float)
    shape = maxwellian(grid.nodes - c) / grid.sqrt_mu
    vals = np.outer(_modulation(domain, depth), shape)
    unit = PerturbationField(vals, grid, domain)
    if target_norm is not None:
        base = norm_lp_v_linf_x(unit, WeightSpec() if spec is None else spec)
        epsilon = target_norm / base
    return PerturbationField(epsilon * vals, grid, domain)


def bimodal(grid: VelocityGrid, domain: SpatialDomain | None = None, *, separation: float = 3.0,
            depth: float = 0.0) -> PerturbationField:
    """F0 = (mu(v - c) + mu(v + c)) / 2 with c = (separation/2, 0, 0), optionally x-modulated."""
    domain = SpatialDomain() if domain is None else domain
    c = np.array([0.5 * separation, 0.0, 0.0])
    F = 0.5 * (maxwellian(grid.nodes - c) + maxwellian(grid.nodes + c))
    m = _modulation(domain, depth)
    Fx = np.outer(m, F) + np.outer(1.0 - m, grid.mu)
    if np.any(Fx < 0):
        raise InputError("modulation depth makes F0 negative")
    return PerturbationField((Fx - grid.mu) / grid.sqrt_mu, grid, domain)


def random_smooth(grid: VelocityGrid, domain: SpatialDomain | None = None, *, seed: int | None = None,
                  amplitude: float = 0.3, n_bumps: int = 3) -> PerturbationField:
    """F0 = mu (1 + A sum_k a_k exp(-|v - c_k|^2 / (2 s_k^2)) m_k(x)).

    a_k ~ U(-1, 1), c_k ~ U(-1.5, 1.5)^3, s_k ~ U(0.7, 1.5); m_k(x) is a
    cosine modulation of depth 1/2 with random phase (1 in homogeneous mode),
    divided by 1.5 so that |m_k| <= 1.  F0 > 0 whenever A n_bumps < 1.
    """
    if seed is None:
        raise InputError("random-smooth data require an explicit seed")
    if not 0 <= amplitude * n_bumps < 1:
        raise InputError("amplitude * n_bumps must lie in [0, 1) for positivity")
    domain = SpatialDomain() if domain is None else domain
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1.0, 1.0, n_bumps)
    c = rng.uniform(-1.5, 1.5, (n_bumps, 3))
    s = rng.uniform(0.7, 1.5, n_bumps)
    ph = rng.uniform(0.0, 2.0 * math.pi, n_bumps)
    X = np.zeros((domain.n_cells, grid.size))
    for k in range(n_bumps):
        bump = np.exp(-np.sum((grid.nodes - c[k]) ** 2, axis=1) / (2.0 * s[k] ** 2))
        m = _modulation(domain, 0.5, ph[k])
        m = m / 1.5 if domain.mode != "homogeneous" else m
        X += a[k] * np.outer(m, bump)
    return PerturbationField(amplitude * grid.sqrt_mu * X, grid, domain)


def make(name: str, grid: VelocityGrid, domain: SpatialDomain | None = None,
         spec: WeightSpec | None = None, **params) -> PerturbationField:
    """Dispatch by family name."""
    if name == "zero":
        return zero(grid, domain)
    if name == "gaussian-bump":
        return gaussian_bump(grid, domain, spec=spec, **params)
    if name == "bimodal":
        return bimodal(grid, domain, **params)
    if name == "random-smooth":
        return random_smooth(grid, domain, **params)
    raise InputError(f"unknown initial-data family '{name}' (expected one of {FAMILIES})")
