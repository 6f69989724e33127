"""Lattice quadrature of the collision operators Q+-, Gamma+-, nu and g.

Every gain-type integral is evaluated as

    sum_{u != v} sum_omega W(u - v, omega) c(u) X(v') Y(u')  +  w0 c(v) X(v) Y(v)

with W = h^3 |v-u|^gamma b0 |cos(theta)| times the sphere weight, w0 the
singular-cell weight times the angular integral 2 pi b0, and X, Y trilinearly
interpolated.  The interpolated quantities are always Maxwellian ratios
(F / mu, or f / sqrt(mu)); the Maxwellian itself enters analytically through
c and the prefactors.  Because mu(v') mu(u') = mu(v) mu(u) holds exactly on
the collision sphere, this makes Q(mu, mu) vanish to roundoff and keeps every
gain term nonnegative for nonnegative F.

Trilinear interpolation at a point with fractional offsets theta_i
overestimates by sum_i theta_i (1 - theta_i) h^2 / 2 d_ii X, which averages
to h^2/12 Lap X over the scattered post-collision points.  That bias is a
first-order (in F - mu) violation of the collision invariants.  The default
``interpolation="corrected"`` removes it by interpolating the prefiltered
nodal data X - h^2/12 Lap_h X (7-point Laplacian); ``"trilinear"`` is the
plain scheme.  Both are linear in X and reproduce constants and linear
functions.  Where a ratio of a nonnegative F is interpolated, the prefiltered
data are clipped at zero so that the gain stays nonnegative.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

from . import _kernels
from .errors import InputError
from .phase_space import (
    KernelParams,
    SpatialDomain,
    SphereQuadrature,
    VelocityGrid,
    equivalent_radius,
    maxwellian,
    padding_for,
    singular_cell_weight,
)

CHI_NONE, CHI_INNER, CHI_OUTER = 0, 1, 2


@dataclass
class DistributionField:
    """F(t, x, v) on the cells of ``domain`` times the nodes of ``grid``.

    ``values`` has shape (n_cells, n^3).
    """

    values: np.ndarray
    grid: VelocityGrid
    domain: SpatialDomain = field(default_factory=SpatialDomain)
    time: float = 0.0

    def __post_init__(self):
        self.values = _check_layout(self.values, self.grid, self.domain)

    def to_perturbation(self) -> "PerturbationField":
        f = (self.values - self.grid.mu) / self.grid.sqrt_mu
        return PerturbationField(f, self.grid, self.domain, self.time)

    def ratio(self) -> np.ndarray:
        """F / mu."""
        return self.values / self.grid.mu

    @classmethod
    def maxwellian(cls, grid: VelocityGrid, domain: SpatialDomain | None = None, scale: float = 1.0):
        domain = domain or SpatialDomain()
        vals = np.tile(scale * grid.mu, (domain.n_cells, 1))
        return cls(vals, grid, domain)


@dataclass
class PerturbationField:
    """f = (F - mu) / sqrt(mu) with the layout of :class:`DistributionField`."""

    values: np.ndarray
    grid: VelocityGrid
    domain: SpatialDomain = field(default_factory=SpatialDomain)
    time: float = 0.0

    def __post_init__(self):
        self.values = _check_layout(self.values, self.grid, self.domain)

    def to_distribution(self) -> DistributionField:
        F = self.grid.mu + self.grid.sqrt_mu * self.values
        return DistributionField(F, self.grid, self.domain, self.time)

    def ratio(self) -> np.ndarray:
        """f / sqrt(mu) = F / mu - 1."""
        return self.values / self.grid.sqrt_mu

    @classmethod
    def zeros(cls, grid: VelocityGrid, domain: SpatialDomain | None = None):
        domain = domain or SpatialDomain()
        return cls(np.zeros((domain.n_cells, grid.size)), grid, domain)


def _check_layout(values, grid: VelocityGrid, domain: SpatialDomain) -> np.ndarray:
    a = np.asarray(values, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if a.shape != (domain.n_cells, grid.size):
        raise InputError(f"field shape {a.shape} does not match ({domain.n_cells}, {grid.size})")
    if not np.all(np.isfinite(a)):
        raise InputError("field contains non-finite values")
    return a


def _same_grids(*fields):
    g0 = fields[0]
    for fld in fields[1:]:
        if not (fld.grid.same_as(g0.grid) and fld.domain == g0.domain):
            raise InputError("fields live on different grids")


def collision_kernel(v, u, omega, params: KernelParams) -> float:
    """B(v - u, theta) = |v-u|^gamma b0 |cos(theta)|, cos(theta) = (v-u).omega / |v-u|."""
    z = np.asarray(v, dtype=float) - np.asarray(u, dtype=float)
    w = np.asarray(omega, dtype=float)
    if abs(float(w @ w) - 1.0) > 1e-12:
        raise InputError("omega must be a unit vector")
    r = float(np.linalg.norm(z))
    if r == 0.0:
        raise InputError("coincident velocities: use singular_cell_weight for u = v")
    return r ** params.gamma * params.b0 * abs(float(z @ w)) / r


def cutoff_cell_weight(exponent: float, h: float, m: float, chi_mode: int) -> float:
    """Integral of |z|^exponent chi(|z|) over the equal-volume ball, chi per ``chi_mode``."""
    full = singular_cell_weight(exponent, h)
    if chi_mode == CHI_NONE:
        return full
    r = equivalent_radius(h)
    if r <= m:
        return full if chi_mode == CHI_INNER else 0.0
    chi = np.vectorize(lambda s: _kernels.smoothstep_cutoff(s, m))
    inner = 4.0 * math.pi * m ** (3.0 + exponent) / (3.0 + exponent)
    ramp, _ = integrate.quad(lambda s: s ** (2.0 + exponent) * chi(s), m, min(r, 2.0 * m),
                             epsabs=0.0, epsrel=1e-13)
    val = inner + 4.0 * math.pi * ramp
    return val if chi_mode == CHI_INNER else full - val


class CollisionQuadrature:
    """Precomputed lattice quadrature for one (grid, sphere, kernel) triple.

    Parameters
    ----------
    grid, sphere, params
        Discretization and kernel.
    threads : int
        Worker threads for batched evaluations.  Results do not depend on it:
        each field is reduced serially in a fixed order.
    """

    def __init__(self, grid: VelocityGrid, sphere: SphereQuadrature, params: KernelParams,
                 threads: int = 1, interpolation: str = "corrected"):
        if interpolation not in ("corrected", "trilinear"):
            raise InputError(f"unknown interpolation '{interpolation}'")
        self.interpolation = interpolation
        self.grid = grid
        self.sphere = sphere
        self.params = params
        self.threads = max(1, int(threads))
        self.n = grid.n
        self.P = padding_for(grid.n)
        tn, tw = sphere.hemisphere
        self._tn = np.ascontiguousarray(tn)
        self._tw = np.ascontiguousarray(tw)
        phi = sphere.azimuth
        self._cphi = np.cos(phi)
        self._sphi = np.sin(phi)
        # angular integral of |cos theta| as realized by the rule (2 pi to roundoff)
        self.angular = 2.0 * float(np.sum(tw * tn)) * 2.0 * math.pi
        self._tables: dict = {}

    # -- padding -----------------------------------------------------------
    def pad(self, X: np.ndarray, fill: float = 0.0) -> np.ndarray:
        """Embed flat lattice values (..., n^3) into the padded cube, flattened."""
        n, P = self.n, self.P
        X = np.asarray(X, dtype=float)
        lead = X.shape[:-1]
        N = n + 2 * P
        out = np.full(lead + (N, N, N), fill)
        out[..., P:P + n, P:P + n, P:P + n] = X.reshape(lead + (n, n, n))
        return out.reshape(lead + (N ** 3,))

    def prefilter(self, X: np.ndarray, fill: float = 0.0, clip: bool = False, floor: float = 0.0) -> np.ndarray:
        """Nodal data handed to the interpolator (see module docstring); ``clip`` floors them at ``floor``."""
        X = np.asarray(X, dtype=float)
        if self.interpolation == "trilinear":
            out = X
        else:
            n = self.n
            lead = X.shape[:-1]
            A = X.reshape(lead + (n, n, n))
            pad = [(0, 0)] * len(lead) + [(1, 1)] * 3
            B = np.pad(A, pad, constant_values=fill)
            c = B[..., 1:-1, 1:-1, 1:-1]
            lap = (B[..., 2:, 1:-1, 1:-1] + B[..., :-2, 1:-1, 1:-1]
                   + B[..., 1:-1, 2:, 1:-1] + B[..., 1:-1, :-2, 1:-1]
                   + B[..., 1:-1, 1:-1, 2:] + B[..., 1:-1, 1:-1, :-2] - 6.0 * c)
            out = (A - lap / 12.0).reshape(X.shape)
        if clip:
            out = np.maximum(out, floor)
        return out

    # -- weights -----------------------------------------------------------
    def cell_weight(self, chi_mode: int = CHI_NONE, m: float | None = None) -> float:
        """Coincident-node weight: ball integral of |z|^gamma (times cutoff) times 2 pi b0."""
        m = self.params.m_cutoff if m is None else m
        return cutoff_cell_weight(self.params.gamma, self.grid.spacing, m, chi_mode) * self.angular * self.params.b0

    def loss_table(self, chi_mode: int = CHI_NONE, m: float | None = None) -> np.ndarray:
        m = self.params.m_cutoff if m is None else m
        key = (chi_mode, m if chi_mode else None)
        if key not in self._tables:
            n, h = self.n, self.grid.spacing
            k = np.arange(-(n - 1), n)
            K = np.sqrt(k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2) * h
            with np.errstate(divide="ignore"):
                tab = h ** 3 * self.angular * self.params.b0 * K ** self.params.gamma
            c = n - 1
            tab[c, c, c] = 0.0
            if chi_mode:
                chi = np.vectorize(lambda s: _kernels.cutoff_factor(s, m, chi_mode))(K)
                tab = tab * chi
            tab[c, c, c] = self.cell_weight(chi_mode, m)
            self._tables[key] = np.ascontiguousarray(tab.ravel())
        return self._tables[key]

    # -- primitive sums ----------------------------------------------------
    def convolve(self, values: np.ndarray, chi_mode: int = CHI_NONE, m: float | None = None) -> np.ndarray:
        """R[h](v) = sum_u w(u - v) h(u) with the loss-kernel weights; batched over leading axes."""
        tab = self.loss_table(chi_mode, m)
        arr = np.asarray(values, dtype=float)
        flat = arr.reshape(-1, self.grid.size)
        out = np.stack([_kernels.convolve(tab, np.ascontiguousarray(r), self.n) for r in flat])
        return out.reshape(arr.shape)

    def gain(self, X: np.ndarray, Y: np.ndarray | None = None, *, weight: np.ndarray | None = None,
             additive: bool = False, shifted: bool = False, chi_mode: int = CHI_NONE,
             m: float | None = None, fill: float = 0.0, clip: bool = False) -> np.ndarray:
        """sum_{u, omega} W c(u) A(v', u') on the lattice.

        A is X(v') Y(u') (product), X(v') + X(u') (``additive``) or
        X(v') + X(u') + X(v') X(u') (``shifted``, the gain of 1 + X minus the
        gain of 1, without the cancellation of forming 1 + X); ``Y=None``
        means Y = X.  ``weight`` is c (default mu).  ``fill`` is the value of X
        outside the truncation box.  ``clip`` clips the prefiltered data at 0
        (for ratios of nonnegative distributions; at -1 when ``shifted``).  Leading axes of X are batched.
        The coincident node (v' = u' = v) uses the nodal data, the exact integrand there.
        """
        m = self.params.m_cutoff if m is None else m
        c = np.ascontiguousarray(self.grid.mu if weight is None else weight, dtype=float)
        X = np.asarray(X, dtype=float)
        lead = X.shape[:-1]
        Xb = X.reshape(-1, self.grid.size)
        args = (self.n, self.P, self.grid.spacing, self.params.gamma, self.params.b0,
                self._tn, self._tw, self._cphi, self._sphi, m, chi_mode)
        w0 = self.cell_weight(chi_mode, m)
        if additive and shifted:
            raise InputError("additive and shifted are exclusive")
        if Y is None:
            mode = 1 if additive else (2 if shifted else 0)
            Xh = self.prefilter(Xb, fill, clip, -1.0 if shifted else 0.0)
            Xp = self.pad(Xh, fill)
            out = self._map(lambda i: _kernels.gain_symmetric(Xp[i], c, *args, mode), Xb.shape[0])
            diag = (Xb * Xb, 2.0 * Xb, 2.0 * Xb + Xb * Xb)[mode]
        else:
            if additive or shifted:
                raise InputError("additive and shifted gains are defined for a single argument")
            Y = np.asarray(Y, dtype=float).reshape(-1, self.grid.size)
            if Y.shape != Xb.shape:
                raise InputError("gain arguments have different shapes")
            Xh = self.prefilter(Xb, fill, clip)
            Yh = self.prefilter(Y, fill, clip)
            Xp = self.pad(Xh, fill)
            Yp = self.pad(Yh, fill)
            out = self._map(lambda i: _kernels.gain_general(Xp[i], Yp[i], c, *args), Xb.shape[0])
            diag = Xb * Y
        out = out + w0 * c * diag
        return out.reshape(lead + (self.grid.size,))

    def _map(self, fn, count: int) -> np.ndarray:
        """Evaluate fn(0..count-1); threads run the same compiled per-field kernel (GIL released),
        so the result is bitwise independent of the thread count."""
        if self.threads > 1 and count > 1:
            with ThreadPoolExecutor(max_workers=min(self.threads, count)) as ex:
                return np.stack(list(ex.map(fn, range(count))))
        return np.stack([fn(i) for i in range(count)])

    # -- derived quantities ------------------------------------------------
    @cached_property
    def nu(self) -> np.ndarray:
        """Collision frequency at every node."""
        return self.convolve(self.grid.mu)

    @cached_property
    def gain_of_ones(self) -> np.ndarray:
        """sum W mu(u) over the padded-by-one lattice; equals nu up to roundoff."""
        return self.gain(np.ones(self.grid.size), fill=1.0)


def collision_frequency(v, grid: VelocityGrid, sphere: SphereQuadrature, params: KernelParams) -> float | np.ndarray:
    """Lattice quadrature of nu(v) = int int B(v-u, theta) mu(u) d omega du at arbitrary v.

    A velocity that coincides with a lattice node receives the singular-cell
    weight for that node.
    """
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    V = np.atleast_2d(v)
    t, w = sphere.nodes[:, 2], sphere.weights
    ang = float(np.sum(w * np.abs(t)))
    h = grid.spacing
    w0 = singular_cell_weight(params.gamma, h)
    out = np.empty(V.shape[0])
    mu = grid.mu
    for i, vi in enumerate(V):
        d = np.sqrt(np.sum((grid.nodes - vi) ** 2, axis=1))
        near = d < 1e-12 * h
        with np.errstate(divide="ignore"):
            ker = np.where(near, w0 / h ** 3, d ** params.gamma)
        out[i] = params.b0 * ang * grid.quad_weight * math.fsum(ker * mu)
    return float(out[0]) if single else out


def _select(arr: np.ndarray, cell, node):
    if cell is None and node is None:
        return arr
    if node is None:
        return arr[cell]
    if cell is None:
        return arr[:, node]
    return float(arr[cell, node])


def q_gain(F: DistributionField, G: DistributionField, quad: CollisionQuadrature, cell=None, node=None):
    """Q+(F, G) at (cell, node); full (n_cells, n^3) array when both are None."""
    _same_grids(F, G)
    X = F.ratio()
    if G is F or np.array_equal(F.values, G.values):
        out = quad.gain(X, clip=True)
    else:
        out = quad.gain(X, G.ratio(), clip=True)
    return _select(quad.grid.mu * out, cell, node)


def q_loss(F: DistributionField, G: DistributionField, quad: CollisionQuadrature, cell=None, node=None):
    """Q-(F, G) = F(v) sum_u w B G(u)."""
    _same_grids(F, G)
    return _select(F.values * quad.convolve(G.values), cell, node)


def collision_operator(F: DistributionField, quad: CollisionQuadrature) -> np.ndarray:
    """Q(F, F) = Q+ - Q-, shape (n_cells, n^3)."""
    return q_gain(F, F, quad) - q_loss(F, F, quad)


def gamma_plus(f: PerturbationField, quad: CollisionQuadrature, cell=None, node=None):
    """Gamma+(f, f) = sqrt(mu)(v) sum W mu(u) phi(v') phi(u'), phi = f / sqrt(mu)."""
    out = quad.grid.sqrt_mu * quad.gain(f.ratio())
    return _select(out, cell, node)


def gamma_minus(f: PerturbationField, quad: CollisionQuadrature, cell=None, node=None):
    """Gamma-(f, f) = f(v) R[sqrt(mu) f](v)."""
    out = f.values * quad.convolve(quad.grid.sqrt_mu * f.values)
    return _select(out, cell, node)


def g_field(f: PerturbationField, quad: CollisionQuadrature, cell=None, node=None):
    """Loss rate g = R[mu + sqrt(mu) f] = nu + R[sqrt(mu) f]."""
    out = quad.convolve(quad.grid.mu + quad.grid.sqrt_mu * f.values)
    return _select(out, cell, node)


def collision_invariants(grid: VelocityGrid) -> np.ndarray:
    """Rows 1, v_x, v_y, v_z, |v|^2 at every node, shape (5, n^3)."""
    V = grid.nodes
    return np.vstack([np.ones(grid.size), V.T, grid.speed2])


def conservation_defect(F: DistributionField, quad: CollisionQuadrature) -> np.ndarray:
    """|sum_v w Q(F,F) phi| / ||Q+(F,F)||_{L^1} for the five invariants, per cell (max)."""
    gain = q_gain(F, F, quad)
    Q = gain - q_loss(F, F, quad)
    phi = collision_invariants(quad.grid)
    num = np.abs(Q @ phi.T) * quad.grid.quad_weight
    den = quad.grid.quad_weight * np.sum(np.abs(gain), axis=1)
    return np.max(num / den[:, None], axis=0)


__all__ = [
    "DistributionField",
    "PerturbationField",
    "CollisionQuadrature",
    "collision_kernel",
    "collision_frequency",
    "q_gain",
    "q_loss",
    "collision_operator",
    "gamma_plus",
    "gamma_minus",
    "g_field",
    "collision_invariants",
    "conservation_defect",
    "cutoff_cell_weight",
    "maxwellian",
    "CHI_NONE",
    "CHI_INNER",
    "CHI_OUTER",
]
