"""Velocity lattice, sphere quadrature, spatial torus and elementary kinematics.

The velocity space is truncated to the cube [-L, L]^3 and sampled on an odd
Cartesian lattice so that v = 0 is a node.  Directions on the unit sphere are
integrated with a product rule (Gauss-Legendre in cos(theta) on each
hemisphere, uniform in azimuth), which integrates |cos(theta)| exactly about
its polar axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DivergentIntegralError, InputError

TWO_PI = 2.0 * math.pi
MU0 = TWO_PI ** -1.5  # Maxwellian at the origin


@dataclass(frozen=True)
class KernelParams:
    """Parameters of the cutoff soft-potential kernel B = |v-u|^gamma b0 |cos(theta)|.

    Attributes
    ----------
    gamma : float
        Soft-potential exponent, -3 < gamma < 0.
    b0 : float
        Angular amplitude, b0 > 0.
    m_cutoff : float
        Length scale of the smooth cutoff used to split K, 0 < m <= 1.
    """

    gamma: float = -1.0
    b0: float = 1.0
    m_cutoff: float = 0.5

    def __post_init__(self):
        if not (-3.0 < self.gamma < 0.0):
            raise InputError(f"gamma must lie in (-3, 0), got {self.gamma}")
        if not self.b0 > 0.0:
            raise InputError(f"b0 must be positive, got {self.b0}")
        if not (0.0 < self.m_cutoff <= 1.0):
            raise InputError(f"m_cutoff must lie in (0, 1], got {self.m_cutoff}")


def maxwellian(v) -> np.ndarray | float:
    """Global Maxwellian (2 pi)^{-3/2} exp(-|v|^2 / 2).

    Parameters
    ----------
    v : array_like, shape (..., 3)

    Returns
    -------
    float or ndarray of shape (...)
    """
    v = np.asarray(v, dtype=float)
    out = MU0 * np.exp(-0.5 * np.sum(v * v, axis=-1))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class VelocityGrid:
    """Odd Cartesian lattice on [-extent, extent]^3.

    Nodes are ordered with the z index fastest (C order on an ``(n, n, n)``
    array), so a flat field of length n^3 reshapes to ``(n, n, n)``.
    """

    extent: float = 8.0
    nodes_per_axis: int = 25

    def __post_init__(self):
        n = self.nodes_per_axis
        if n < 3 or n % 2 == 0:
            raise InputError(f"nodes_per_axis must be odd and >= 3, got {n}")
        if not self.extent > 0:
            raise InputError(f"extent must be positive, got {self.extent}")

    @property
    def n(self) -> int:
        return self.nodes_per_axis

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / (self.nodes_per_axis - 1)

    @property
    def quad_weight(self) -> float:
        return self.spacing ** 3

    @property
    def size(self) -> int:
        return self.nodes_per_axis ** 3

    @cached_property
    def axis(self) -> np.ndarray:
        n = self.nodes_per_axis
        # exact symmetric lattice: integer multiples of h
        return (np.arange(n) - (n - 1) // 2) * self.spacing

    @cached_property
    def nodes(self) -> np.ndarray:
        """Node coordinates, shape (n^3, 3)."""
        a = self.axis
        g = np.stack(np.meshgrid(a, a, a, indexing="ij"), axis=-1)
        return g.reshape(-1, 3)

    @cached_property
    def speed2(self) -> np.ndarray:
        return np.sum(self.nodes ** 2, axis=1)

    @cached_property
    def speed(self) -> np.ndarray:
        return np.sqrt(self.speed2)

    @cached_property
    def mu(self) -> np.ndarray:
        return MU0 * np.exp(-0.5 * self.speed2)

    @cached_property
    def sqrt_mu(self) -> np.ndarray:
        return math.sqrt(MU0) * np.exp(-0.25 * self.speed2)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Lattice quadrature over the last axis (velocity)."""
        return self.quad_weight * np.sum(values, axis=-1)

    def reflect_index(self) -> np.ndarray:
        """Permutation mapping node i to the node at -v_i."""
        return np.arange(self.size)[::-1].copy()

    def same_as(self, other: "VelocityGrid") -> bool:
        return self.nodes_per_axis == other.nodes_per_axis and self.extent == other.extent


@dataclass(frozen=True)
class SphereQuadrature:
    """Product rule on S^2 exact for polynomials of total degree <= ``order``.

    ``ceil((order+1)/2)`` Gauss-Legendre nodes in t = cos(theta) on each of the
    two hemispheres and ``order + 1`` uniform azimuth nodes.  Splitting at the
    equator makes the rule exact for |t| * polynomial as well.
    """

    order: int = 8

    def __post_init__(self):
        if self.order < 1:
            raise InputError(f"sphere order must be >= 1, got {self.order}")

    @cached_property
    def hemisphere(self) -> tuple[np.ndarray, np.ndarray]:
        """Polar nodes t in (0, 1) and weights summing to 1."""
        m = (self.order + 2) // 2
        x, w = np.polynomial.legendre.leggauss(m)
        return 0.5 * (x + 1.0), 0.5 * w

    @cached_property
    def azimuth(self) -> np.ndarray:
        nphi = self.order + 1
        return TWO_PI * np.arange(nphi) / nphi

    @cached_property
    def _rule(self) -> tuple[np.ndarray, np.ndarray]:
        t, wt = self.hemisphere
        t = np.concatenate([-t[::-1], t])
        wt = np.concatenate([wt[::-1], wt])
        phi = self.azimuth
        dphi = TWO_PI / phi.size
        T, PH = np.meshgrid(t, phi, indexing="ij")
        st = np.sqrt(1.0 - T * T)
        nodes = np.stack([st * np.cos(PH), st * np.sin(PH), T], axis=-1).reshape(-1, 3)
        weights = (wt[:, None] * dphi * np.ones_like(PH)).reshape(-1)
        return nodes, weights

    @property
    def nodes(self) -> np.ndarray:
        return self._rule[0]

    @property
    def weights(self) -> np.ndarray:
        return self._rule[1]

    def rotated(self, axis) -> np.ndarray:
        """Nodes of the rule with its polar axis moved onto ``axis``."""
        zh, e1, e2 = orthonormal_frame(axis)
        nd = self.nodes
        return nd[:, 0:1] * e1 + nd[:, 1:2] * e2 + nd[:, 2:3] * zh


def orthonormal_frame(axis) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-handed frame (zhat, e1, e2) with zhat parallel to ``axis``.

    The auxiliary direction is the coordinate axis with the smallest
    component of zhat (first one on ties), the same convention the compiled
    kernels use.
    """
    a = np.asarray(axis, dtype=float)
    r = float(np.linalg.norm(a))
    if r == 0.0:
        raise InputError("frame axis must be non-zero")
    zh = a / r
    k = int(np.argmin(np.abs(zh)))
    ref = np.zeros(3)
    ref[k] = 1.0
    e1 = np.cross(ref, zh)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(zh, e1)
    return zh, e1, e2


def post_collision(v, u, omega, atol: float = 1e-12):
    """Post-collision velocities v' = v - [(v-u).w] w, u' = u + [(v-u).w] w.

    Raises
    ------
    InputError
        If ``omega`` is not a unit vector within ``atol``.
    """
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    w = np.asarray(omega, dtype=float)
    if np.any(np.abs(np.sum(w * w, axis=-1) - 1.0) > atol):
        raise InputError("omega must be a unit vector")
    s = np.sum((v - u) * w, axis=-1)[..., None]
    return v - s * w, u + s * w


@dataclass(frozen=True)
class SpatialDomain:
    """Periodic spatial domain.

    ``homogeneous`` is the space-homogeneous reduction (one cell of volume
    ``prod(period)``), ``slab1d`` varies along x only, ``torus3d`` is a full
    periodic box.  Internally every mode is a box with three periods and
    three cell counts; unused axes carry a single cell.
    """

    mode: str = "homogeneous"
    period: tuple[float, ...] | float = 1.0
    cells_per_axis: tuple[int, ...] | int = 1
    periods: tuple[float, float, float] = field(init=False)
    cells: tuple[int, int, int] = field(init=False)

    def __post_init__(self):
        per = np.atleast_1d(np.asarray(self.period, dtype=float)).tolist()
        cel = [int(c) for c in np.atleast_1d(np.asarray(self.cells_per_axis))]
        if any(p <= 0 for p in per):
            raise InputError("periods must be positive")
        if any(c < 1 for c in cel):
            raise InputError("cell counts must be >= 1")
        if self.mode == "homogeneous":
            if any(c != 1 for c in cel):
                raise InputError("homogeneous mode has exactly one cell")
            periods = (per[0],) * 3 if len(per) == 1 else tuple(per)
            cells = (1, 1, 1)
        elif self.mode == "slab1d":
            if len(per) != 1 or len(cel) != 1:
                raise InputError("slab1d takes a scalar period and cell count")
            periods = (per[0], 1.0, 1.0)
            cells = (cel[0], 1, 1)
        elif self.mode == "torus3d":
            periods = tuple(per * 3) if len(per) == 1 else tuple(per)
            cells = tuple(cel * 3) if len(cel) == 1 else tuple(cel)
        else:
            raise InputError(f"unknown domain mode '{self.mode}'")
        if len(periods) != 3 or len(cells) != 3:
            raise InputError("torus3d needs three periods and three cell counts")
        object.__setattr__(self, "periods", tuple(float(p) for p in periods))
        object.__setattr__(self, "cells", tuple(int(c) for c in cells))

    @property
    def n_cells(self) -> int:
        return self.cells[0] * self.cells[1] * self.cells[2]

    @property
    def volume(self) -> float:
        if self.mode == "slab1d":
            return self.periods[0]
        if self.mode == "homogeneous":
            return self.periods[0] if np.ndim(self.period) == 0 else float(np.prod(self.periods))
        return float(np.prod(self.periods))

    @property
    def cell_volume(self) -> float:
        return self.volume / self.n_cells

    @property
    def dx(self) -> np.ndarray:
        return np.asarray(self.periods) / np.asarray(self.cells)

    def centers(self) -> np.ndarray:
        """Cell centres, shape (n_cells, 3); the homogeneous cell sits at the origin."""
        if self.mode == "homogeneous":
            return np.zeros((1, 3))
        axes = [(np.arange(c) + 0.5) * d for c, d in zip(self.cells, self.dx)]
        g = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return g.reshape(-1, 3)

    def wrap(self, x):
        """Map coordinates into [0, period) along each periodic axis."""
        x = np.asarray(x, dtype=float)
        if self.mode == "homogeneous":
            return np.zeros_like(x)
        per = np.asarray(self.periods[: x.shape[-1]] if x.ndim else self.periods[0])
        y = np.mod(x, per)
        # mod can round up to exactly the period
        return np.where(y >= per, y - per, y)


def backward_characteristic(x, v, elapsed: float, domain: SpatialDomain):
    """Foot of the backward characteristic, x - v * elapsed, wrapped periodically.

    For ``slab1d`` scalars are accepted and a 3-vector velocity contributes its
    first component.  In homogeneous mode the single cell is returned.
    """
    if elapsed < 0:
        raise InputError("elapsed time must be non-negative")
    if domain.mode == "homogeneous":
        return np.zeros_like(np.asarray(x, dtype=float))
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if domain.mode == "slab1d" and x.ndim == 0:
        vx = v if v.ndim == 0 else v[..., 0]
        y = float(np.mod(x - vx * elapsed, domain.periods[0]))
        return 0.0 if y >= domain.periods[0] else y
    if elapsed == 0:
        return domain.wrap(x)
    return domain.wrap(x - v * elapsed)


def equivalent_radius(h: float) -> float:
    """Radius of the ball with volume h^3."""
    return h * (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0)


def singular_cell_weight(exponent: float, h: float) -> float:
    """Integral of |z|^exponent over the ball of volume h^3 centred at 0.

    Equals 4 pi r^(3+e) / (3+e) with r the equivalent radius.  Used as the
    quadrature weight of the coincident node of an integrable singularity.

    Raises
    ------
    DivergentIntegralError
        If ``exponent <= -3``.
    """
    if exponent <= -3.0:
        raise DivergentIntegralError(f"|z|^{exponent} is not integrable at 0")
    if h <= 0:
        raise InputError("spacing must be positive")
    r = equivalent_radius(h)
    return 4.0 * math.pi * r ** (3.0 + exponent) / (3.0 + exponent)


def padding_for(n: int) -> int:
    """Zero margin (in nodes) covering every post-collision velocity of the lattice.

    For v, u in the box, v' and u' stay within distance |v-u|/sqrt(2) of the box
    midpoint direction; (n-1)/sqrt(2) plus one interpolation cell bounds the
    overshoot in every coordinate.
    """
    return int(math.ceil((n - 1) / math.sqrt(2.0))) + 2


def as_vectors(points: Sequence[float] | np.ndarray) -> np.ndarray:
    a = np.asarray(points, dtype=float)
    if a.shape[-1] != 3:
        raise InputError("expected 3-vectors")
    return a
