"""Mild-form time integration and the Picard approximation sequence.

Each Picard step solves, along backward characteristics x - v(t - s),

    f^{n+1}(t) = e^{-G(t)} f0(x - v t) + int_0^t e^{-(G(t) - G(s))} S^n(s) ds,

with frozen loss rate g^n = R[mu + sqrt(mu) f^n] (G its time integral) and
frozen source S^n = K f^n + Gamma+(f^n, f^n).  The time integrals use the
stored substeps.  On each substep the source is averaged by the trapezoid
rule and multiplied by the exact integral of the exponential factor for the
trapezoid-averaged rate, i.e. the weight (dt/2) phi1(dG) with
phi1(x) = (1 - e^{-x}) / x.  Applied to g itself these weights sum to
exactly 1 - e^{-G(t)}, which makes F = mu stationary and keeps
F^{n+1} = mu + sqrt(mu) f^{n+1} nonnegative whenever F^n is.

Spatial transport is periodic linear interpolation, one axis at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .collision import CollisionQuadrature, PerturbationField
from .errors import InputError, PositivityViolationError, SolverDivergenceError
from .norms import (
    NormReport,
    WeightSpec,
    entropy_functional,
    norm_lp_v_linf_window,
    norm_lp_v_linf_x,
    norm_report,
)
from .phase_space import SpatialDomain, VelocityGrid
from .trajectory import Trajectory

PHYSICS = ("full", "linear", "transport", "free")


@dataclass(frozen=True)
class SolverConfig:
    """Time-integration settings.

    Attributes
    ----------
    horizon : float
        Requested window length T; each window uses min(T, T1).
    substeps : int
        Substeps per window (>= 2).
    picard_tol : float
        Stop when the weighted successive difference falls below this.
    picard_max_iters : int
        Iteration cap (>= 2).
    C1 : float
        Local-existence constant in T1.
    positivity_tol : float
        Relative tolerance: F^n >= -positivity_tol * max F^n is required.
    physics : {"full", "linear", "transport", "free"}
        Which terms are active.  ``linear`` keeps nu and K, ``transport``
        keeps nu only, ``free`` is collisionless transport.
    """

    horizon: float = 1.0
    substeps: int = 4
    picard_tol: float = 1e-10
    picard_max_iters: int = 20
    C1: float = 1.0
    positivity_tol: float = 1e-10
    physics: str = "full"

    def __post_init__(self):
        if not self.picard_tol > 0:
            raise InputError("picard_tol must be positive")
        if self.picard_max_iters < 2:
            raise InputError("picard_max_iters must be >= 2")
        if not self.C1 > 0:
            raise InputError("C1 must be positive")
        if self.substeps < 2:
            raise InputError("substeps must be >= 2")
        if not self.horizon > 0:
            raise InputError("horizon must be positive")
        if self.positivity_tol < 0:
            raise InputError("positivity_tol must be nonnegative")
        if self.physics not in PHYSICS:
            raise InputError(f"physics must be one of {PHYSICS}")


@dataclass
class IterationTrace:
    """Convergence record of one local solve."""

    norms: list[float] = field(default_factory=list)
    diffs: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)
    min_F: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    window: int = 0

    def rows(self):
        """(iterate, norm, diff, ratio, min F / max F) rows; ratio is nan when not recorded."""
        out = []
        for i, (nm, d) in enumerate(zip(self.norms, self.diffs)):
            r = self.ratios[i - 1] if 0 < i <= len(self.ratios) else math.nan
            out.append((i + 1, nm, d, r, self.min_F[i] if i < len(self.min_F) else math.nan))
        return out


def compute_T1(f0: PerturbationField, spec: WeightSpec, C1: float = 1.0) -> float:
    """T1 = 1 / (6 C1 (1 + ||w_beta f0||_{L^p_v L^inf_x}))."""
    nrm = norm_lp_v_linf_x(f0, spec)
    if not math.isfinite(nrm):
        raise InputError("initial-data norm is not finite")
    if not C1 > 0:
        raise InputError("C1 must be positive")
    return 1.0 / (6.0 * C1 * (1.0 + nrm))


# ---------------------------------------------------------------------------
# transport

def shift(values: np.ndarray, tau: float, grid: VelocityGrid, domain: SpatialDomain) -> np.ndarray:
    """values(x - v tau, v) by periodic linear interpolation, axis by axis.

    ``values`` has shape (n_cells, n^3).  Axes with a single cell are skipped
    (the field is constant along them).
    """
    if domain.mode == "homogeneous" or tau == 0.0:
        return values
    A = values.reshape(tuple(domain.cells) + (grid.size,))
    for ax in range(3):
        N = domain.cells[ax]
        if N == 1:
            continue
        s = grid.nodes[:, ax] * tau / domain.dx[ax]
        q = np.floor(s)
        th = s - q
        i = np.arange(N)[:, None]
        i0 = np.mod(i - q[None, :].astype(np.int64), N)
        i1 = np.mod(i0 - 1, N)
        B = np.moveaxis(A, ax, 0)
        shape = (N,) + (1,) * (B.ndim - 2) + (grid.size,)
        B = (1.0 - th) * np.take_along_axis(B, i0.reshape(shape), 0) + th * np.take_along_axis(B, i1.reshape(shape), 0)
        A = np.moveaxis(B, 0, ax)
    return np.ascontiguousarray(A).reshape(values.shape)


def _phi1(x: np.ndarray) -> np.ndarray:
    small = np.abs(x) < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.expm1(-x) / x
    return np.where(small, 1.0 - 0.5 * x, out)


# ---------------------------------------------------------------------------
# Picard map

def rates_and_sources(values: np.ndarray, quad: CollisionQuadrature, physics: str):
    """Loss rate g and source S at every stored (t, x); inputs/outputs (..., n^3)."""
    grid = quad.grid
    sm = grid.sqrt_mu
    flat = values.reshape(-1, grid.size)
    if physics == "free":
        z = np.zeros_like(flat)
        return z.reshape(values.shape), z.reshape(values.shape)
    if physics == "transport":
        g = np.broadcast_to(quad.nu, flat.shape).copy()
        return g.reshape(values.shape), np.zeros_like(values)
    phi = flat / sm
    R = quad.convolve(sm * flat)
    if physics == "linear":
        g = np.broadcast_to(quad.nu, flat.shape).copy()
        S = sm * (quad.gain(phi, additive=True) - R)
    else:
        g = quad.nu + R
        # gain(1 + phi) - gain(1) evaluated without forming 1 + phi, so that
        # perturbations far below machine epsilon keep their linear part
        S = sm * quad.gain(phi, shifted=True, clip=True) - sm * R
    return g.reshape(values.shape), S.reshape(values.shape)


def duhamel(times: np.ndarray, f0: np.ndarray, g: np.ndarray, S: np.ndarray,
            grid: VelocityGrid, domain: SpatialDomain) -> np.ndarray:
    """Exponentially fitted trapezoid evaluation of the frozen-coefficient mild form.

    ``g`` and ``S`` have shape (n_times, n_cells, n^3); returns the same shape.
    """
    out = np.empty_like(S)
    out[0] = f0
    t0 = times[0]
    for k in range(1, times.size):
        tk = times[k]
        gs = [shift(g[j], tk - times[j], grid, domain) for j in range(k + 1)]
        Ss = [shift(S[j], tk - times[j], grid, domain) for j in range(k + 1)]
        acc = np.zeros_like(f0)
        tail = np.zeros_like(f0)  # G from t_{j+1} to t_k
        for j in range(k - 1, -1, -1):
            dt = times[j + 1] - times[j]
            dG = 0.5 * dt * (gs[j] + gs[j + 1])
            acc += np.exp(-tail) * (0.5 * dt) * _phi1(dG) * (Ss[j] + Ss[j + 1])
            tail = tail + dG
        out[k] = np.exp(-tail) * shift(f0, tk - t0, grid, domain) + acc
    return out


def _check_positivity(values: np.ndarray, grid: VelocityGrid, tol: float, window: int) -> float:
    F = grid.mu + grid.sqrt_mu * values
    lo, hi = float(F.min()), float(F.max())
    rel = lo / hi if hi > 0 else lo
    if lo < -tol * hi:
        raise PositivityViolationError(f"F^n reaches {lo:.3e} (max {hi:.3e})", lo, window)
    return rel


def picard_iterate(fn: Trajectory, f0: PerturbationField, quad: CollisionQuadrature,
                   config: SolverConfig = SolverConfig(), window: int = 0, head=None) -> Trajectory:
    """One application of the approximation map: f^n -> f^{n+1} on the stored times.

    ``head`` optionally supplies (g, S) at the first stored time, which the
    caller may reuse once f^n(t_0) = f0 no longer changes between iterates.
    """
    grid, dom = fn.grid, fn.domain
    if config.physics != "linear":
        _check_positivity(fn.values, grid, config.positivity_tol, window)
    if head is None:
        g, S = rates_and_sources(fn.values, quad, config.physics)
    else:
        g, S = (np.empty_like(fn.values) for _ in range(2))
        g[0], S[0] = head
        g[1:], S[1:] = rates_and_sources(fn.values[1:], quad, config.physics)
    gmax = float(np.max(np.abs(g))) if g.size else 0.0
    if float(g.min()) < -config.positivity_tol * max(gmax, 1e-300):
        raise PositivityViolationError(f"loss rate reaches {float(g.min()):.3e}", float(g.min()), window)
    vals = duhamel(fn.times, f0.values, g, S, grid, dom)
    return Trajectory(fn.times, vals, grid, dom)


def mild_residual(tr: Trajectory, f0: PerturbationField, quad: CollisionQuadrature,
                  config: SolverConfig = SolverConfig(), form: str = "g") -> float:
    """max |f - RHS| over the stored (t, x, v).

    ``form="g"`` is the approximation-map form (loss rate g = R[mu + sqrt(mu) f]);
    ``form="nu"`` uses nu as the exponential rate and K f + Gamma(f, f) as source,
    which agrees with the g-form up to the time-quadrature error.
    """
    if form not in ("g", "nu"):
        raise InputError("form must be 'g' or 'nu'")
    g, S = rates_and_sources(tr.values, quad, config.physics)
    if form == "nu" and config.physics == "full":
        S = S - (g - quad.nu) * tr.values
        g = np.broadcast_to(quad.nu, g.shape)
    rhs = duhamel(tr.times, f0.values, g, S, tr.grid, tr.domain)
    return float(np.max(np.abs(tr.values - rhs))) if tr.values.size else 0.0


def local_solve(f0: PerturbationField, quad: CollisionQuadrature, config: SolverConfig = SolverConfig(),
                spec: WeightSpec | None = None, t_start: float = 0.0, window: int = 0):
    """Picard iteration from f^0 = 0 on [t_start, t_start + min(T, T1)].

    Returns (trajectory, trace).  Raises SolverDivergenceError when the
    weighted successive difference does not drop below ``picard_tol`` within
    ``picard_max_iters`` iterations.
    """
    spec = WeightSpec() if spec is None else spec
    grid, dom = f0.grid, f0.domain
    if config.physics != "linear":
        _check_positivity(f0.values, grid, config.positivity_tol, window)
    T1 = compute_T1(f0, spec, config.C1)
    length = min(config.horizon, T1)
    times = t_start + np.linspace(0.0, length, config.substeps + 1)
    cur = Trajectory.zeros(times, grid, dom)
    trace = IterationTrace(window=window)
    prev_d = None
    head = None
    for it in range(config.picard_max_iters):
        nxt = picard_iterate(cur, f0, quad, config, window, head)
        if head is None:
            # from the first iterate on, f^n(t_start) = f0 and its rates are fixed
            g0, S0 = rates_and_sources(f0.values[None], quad, config.physics)
            head = (g0[0], S0[0])
        trace.min_F.append(_check_positivity(nxt.values, grid, math.inf, window))
        d = norm_lp_v_linf_window(nxt - cur, spec)
        trace.norms.append(norm_lp_v_linf_window(nxt, spec))
        trace.diffs.append(d)
        if prev_d is not None and prev_d > config.picard_tol * 1e-3:
            trace.ratios.append(d / prev_d)
        prev_d = d
        cur = nxt
        trace.iterations = it + 1
        if d < config.picard_tol or d == 0.0:
            trace.converged = True
            return cur, trace
    raise SolverDivergenceError(
        f"window {window}: no convergence in {config.picard_max_iters} iterations "
        f"(last difference {trace.diffs[-1]:.3e})", trace, window)


@dataclass
class MarchResult:
    """Concatenated trajectory of a multi-window march with per-window records."""

    trajectory: Trajectory
    traces: list[IterationTrace]
    reports: list[NormReport]
    entropy: list[float]
    window_starts: list[float]
    entropy_nonincreasing: bool = True
    entropy_violation: float = 0.0


def time_march(f0: PerturbationField, n_windows: int, quad: CollisionQuadrature,
               config: SolverConfig = SolverConfig(), spec: WeightSpec | None = None,
               entropy_tol: float = 0.0) -> MarchResult:
    """Chain local solves over consecutive windows, recomputing T1 at each window start.

    The entropy functional is recorded at every window boundary;
    ``entropy_nonincreasing`` reports (homogeneous mode) whether it never rose
    by more than ``entropy_tol``, and ``entropy_violation`` the largest rise.
    """
    if n_windows < 1:
        raise InputError("n_windows must be >= 1")
    spec = WeightSpec() if spec is None else spec
    grid, dom = f0.grid, f0.domain
    if config.physics != "linear":
        _check_positivity(f0.values, grid, config.positivity_tol, 0)
    start = PerturbationField(f0.values, grid, dom, 0.0)
    t = 0.0
    times, vals, traces, reports, starts = [], [], [], [], []
    ent = [entropy_functional(start)]
    for w in range(n_windows):
        tr, trace = local_solve(start, quad, config, spec, t_start=t, window=w)
        traces.append(trace)
        reports.append(norm_report(tr, spec))
        starts.append(t)
        sl = slice(0 if w == 0 else 1, None)
        times.append(tr.times[sl])
        vals.append(tr.values[sl])
        start = tr.at(tr.n_times - 1)
        t = float(tr.times[-1])
        ent.append(entropy_functional(start))
    full = Trajectory(np.concatenate(times), np.concatenate(vals), grid, dom)
    rises = np.diff(ent)
    worst = float(max(0.0, rises.max())) if rises.size else 0.0
    ok = True if dom.mode != "homogeneous" else bool(worst <= entropy_tol)
    return MarchResult(full, traces, reports, ent, starts, ok, worst)
