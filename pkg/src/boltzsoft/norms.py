"""Weighted norms, defects, entropy and two-sided checks of the entropy and bilinear estimates.

Velocity integrals are lattice sums accumulated with ``math.fsum``: with
theorem-mode weights (beta > 36) the summands span more than forty orders of
magnitude, and the compensated sum keeps the result independent of the
order in which nodes are visited.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .collision import (
    CollisionQuadrature,
    DistributionField,
    PerturbationField,
    gamma_minus,
    gamma_plus,
)
from .errors import DegenerateInputError, InputError
from .trajectory import Trajectory

LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class WeightSpec:
    """Velocity weight exponent and Lebesgue exponents.

    Attributes
    ----------
    beta : float
        Weight exponent in w_beta(v) = (1 + |v|^2)^{beta/2}.
    p : float
        Velocity Lebesgue exponent, 1 < p <= inf.
    q : float or None
        Auxiliary exponent of the bilinear estimates, 3/(3+gamma) < q < p.
    mode : {"theorem", "exploratory"}
        Theorem mode enforces the admissibility conditions; exploratory mode
        only records violations in :attr:`flags`.
    gamma : float
        Kernel exponent the admissibility conditions refer to.
    """

    beta: float = 37.0
    p: float = 4.0
    q: float | None = 2.0
    mode: str = "theorem"
    gamma: float = -1.0
    flags: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.mode not in ("theorem", "exploratory"):
            raise InputError(f"unknown mode '{self.mode}'")
        if not self.p > 1.0:
            raise InputError("p must exceed 1")
        if self.beta < 0:
            raise InputError("beta must be nonnegative")
        if self.q is not None and not (1.0 <= self.q < self.p):
            raise InputError("q must satisfy 1 <= q < p")
        violations = tuple(admissibility_violations(self.beta, self.p, self.q, self.gamma))
        if violations and self.mode == "theorem":
            raise InputError("weight spec not admissible in theorem mode: " + "; ".join(violations))
        object.__setattr__(self, "flags", violations)

    @property
    def p_prime(self) -> float:
        return 1.0 if math.isinf(self.p) else self.p / (self.p - 1.0)

    @property
    def r(self) -> float:
        if self.q is None:
            raise InputError("r needs q")
        return self.p - (self.p - self.q) / (4.0 * self.q)

    def with_beta(self, beta: float) -> "WeightSpec":
        return WeightSpec(beta, self.p, self.q, "exploratory" if self.mode == "exploratory" else self.mode, self.gamma)


def admissibility_violations(beta: float, p: float, q: float | None, gamma: float) -> list[str]:
    """Hypotheses of the local/global existence theorems that (beta, p, q) violate."""
    out = []
    p_min = max(6.0 / (5.0 + gamma), 4.0 / (3.0 - gamma), 3.0 / (3.0 + gamma), (2.0 - gamma) / 2.0)
    if not p > p_min:
        out.append(f"p={p} <= {p_min:.6g}")
    pp = 1.0 if math.isinf(p) else p / (p - 1.0)
    b_min = max(3.0 / pp, 36.0, 6.0 - 2.0 * gamma)
    if not beta > b_min:
        out.append(f"beta={beta} <= {b_min:.6g}")
    if q is not None and not (3.0 / (3.0 + gamma) < q < p):
        out.append(f"q={q} outside ({3.0 / (3.0 + gamma):.6g}, p)")
    return out


def weight(v, beta: float):
    """w_beta(v) = (1 + |v|^2)^{beta/2}."""
    v = np.asarray(v, dtype=float)
    out = (1.0 + np.sum(v * v, axis=-1)) ** (0.5 * beta)
    return float(out) if np.ndim(out) == 0 else out


def _lp(values: np.ndarray, p: float, h3: float) -> float:
    """(h^3 sum |values|^p)^{1/p}, scaled to avoid overflow; max for p = inf."""
    a = np.abs(np.asarray(values, dtype=float)).ravel()
    if a.size == 0:
        return 0.0
    s = float(a.max())
    if s == 0.0 or math.isinf(p):
        return s
    return s * (h3 * math.fsum(((a / s) ** p).tolist())) ** (1.0 / p)


def _as_traj(f) -> Trajectory:
    if isinstance(f, Trajectory):
        return f
    if isinstance(f, PerturbationField):
        return Trajectory(np.array([f.time]), f.values[None], f.grid, f.domain)
    raise InputError("expected a Trajectory or PerturbationField")


def norm_lp_v_linf_window(f, spec: WeightSpec, window=None, beta: float | None = None) -> float:
    """{ sum_v h^3 [ max_{t in window} max_x w_beta |f| ]^p }^{1/p}."""
    tr = _as_traj(f)
    mask = tr.window_mask(window)
    if not mask.any():
        raise InputError("empty time window")
    b = spec.beta if beta is None else beta
    sup = np.max(np.abs(tr.values[mask]), axis=(0, 1))
    return _lp(weight(tr.grid.nodes, b) * sup, spec.p, tr.grid.quad_weight)


def norm_lp_v_linf_x(f0: PerturbationField, spec: WeightSpec, beta: float | None = None) -> float:
    """Initial-data norm ||w_beta f0||_{L^p_v L^inf_x}."""
    return norm_lp_v_linf_window(f0, spec, None, beta)


def norm_l1x_linfv(f0: PerturbationField) -> float:
    """sum_x |cell| max_v |f0|."""
    sup = np.max(np.abs(f0.values), axis=1)
    return f0.domain.cell_volume * math.fsum(sup.tolist())


def norm_linf_t_linf_x_l1v(f, window=None) -> float:
    """max_{t, x} sum_v h^3 |f|."""
    tr = _as_traj(f)
    mask = tr.window_mask(window)
    if not mask.any():
        raise InputError("empty time window")
    sums = [math.fsum(row.tolist()) for row in np.abs(tr.values[mask]).reshape(-1, tr.grid.size)]
    return tr.grid.quad_weight * max(sums)


def _excess(F) -> tuple[np.ndarray, object, object]:
    """F - mu without cancellation when a perturbation is given."""
    if isinstance(F, PerturbationField):
        return F.grid.sqrt_mu * F.values, F.grid, F.domain
    if isinstance(F, DistributionField):
        return F.values - F.grid.mu, F.grid, F.domain
    raise InputError("expected a DistributionField or PerturbationField")


def defects(F) -> tuple[float, np.ndarray, float]:
    """Defect mass, momentum and energy: integrals of (F - mu){1, v, |v|^2} over space and velocity."""
    d, grid, dom = _excess(F)
    w = grid.quad_weight * dom.cell_volume
    flat = d.ravel()
    V = np.tile(grid.nodes, (d.shape[0], 1))
    M0 = w * math.fsum(flat.tolist())
    J0 = np.array([w * math.fsum((flat * V[:, i]).tolist()) for i in range(3)])
    E0 = w * math.fsum((flat * np.tile(grid.speed2, d.shape[0])).tolist())
    return M0, J0, E0


def _psi(s: np.ndarray) -> np.ndarray:
    """(1+s) log(1+s) - s, accurate for small s and equal to 1 at s = -1."""
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    small = np.abs(s) < 1e-2
    x = s[small]
    # alternating series sum_{k>=2} (-1)^k x^k / (k (k-1))
    acc = np.zeros_like(x)
    xp = x * x
    for k in range(2, 12):
        acc += (-1) ** k * xp / (k * (k - 1))
        xp = xp * x
    out[small] = acc
    big = ~small
    y = np.maximum(1.0 + s[big], LOG_FLOOR)
    out[big] = y * np.log(y) - s[big]
    return out


def entropy_functional(F) -> float:
    """Entropy functional int int (F log F - mu log mu) + (3/2 log 2 pi - 1) M0 + E0 / 2.

    Since log mu = -3/2 log 2 pi - |v|^2/2 exactly, the integrand equals
    mu psi(F/mu - 1) with psi(s) = (1+s) log(1+s) - s >= 0, which is how it
    is evaluated: each term is nonnegative and no cancellation occurs.
    F is floored at 1e-300 inside the logarithm only.
    """
    if isinstance(F, PerturbationField):
        s = F.values / F.grid.sqrt_mu
        grid, dom, vals = F.grid, F.domain, F.to_distribution().values
    elif isinstance(F, DistributionField):
        s = F.values / F.grid.mu - 1.0
        grid, dom, vals = F.grid, F.domain, F.values
    else:
        raise InputError("expected a DistributionField or PerturbationField")
    if np.all(vals <= LOG_FLOOR):
        raise DegenerateInputError("distribution vanishes below the log floor everywhere")
    terms = grid.mu * _psi(s)
    return grid.quad_weight * dom.cell_volume * math.fsum(terms.ravel().tolist())


def entropy_functional_direct(F: DistributionField) -> float:
    """Literal evaluation of the defining formula (reference for tests)."""
    grid, dom = F.grid, F.domain
    Fv = np.maximum(F.values, LOG_FLOOR)
    mu = grid.mu
    body = F.values * np.log(Fv) - mu * np.log(mu)
    M0, _, E0 = defects(F)
    w = grid.quad_weight * dom.cell_volume
    return w * math.fsum(body.ravel().tolist()) + (1.5 * math.log(2 * math.pi) - 1.0) * M0 + 0.5 * E0


def relative_entropy_gap(F, F0=None) -> tuple[float, float]:
    """(lhs, rhs) of the relative-entropy control: lhs <= 4 E(F0).

    lhs = int int (F-mu)^2/mu on |F-mu| <= mu, |F-mu| elsewhere.  On the
    boundary |F-mu| = mu the quadratic branch is used (both agree there).
    """
    d, grid, dom = _excess(F)
    mu = grid.mu
    quad_branch = np.abs(d) <= mu
    integrand = np.where(quad_branch, d * d / mu, np.abs(d))
    lhs = grid.quad_weight * dom.cell_volume * math.fsum(integrand.ravel().tolist())
    rhs = 4.0 * entropy_functional(F if F0 is None else F0)
    return lhs, rhs


# ---------------------------------------------------------------------------
# bilinear estimates

def exponents_minus(p: float, q: float) -> tuple[float, float]:
    """Exponents of the weighted and L^1 norms in the Gamma- estimate."""
    return 1.0 + p * (q - 1.0) / (q * (p - 1.0)), (p - q) / (q * (p - 1.0))


def exponents_plus(p: float, q: float) -> tuple[float, float]:
    """Exponents in the Gamma+ estimate: 1/8(1/q-1/p)+1+r/p and 1/8(1/q-1/p)."""
    r = p - (p - q) / (4.0 * q)
    a = 0.125 * (1.0 / q - 1.0 / p)
    return a + 1.0 + r / p, a


def exponent_identities(samples: Iterable[tuple[float, float]] | None = None) -> dict:
    """Symbolic and sampled checks that each bilinear estimate is homogeneous of degree 2.

    Returns a dict with the symbolic residuals (sympy-simplified expressions)
    and the maximum sampled absolute residual for: the Gamma- identity, the
    Gamma+ identity in the form used by the estimate (r/p), and the literal
    variant with r/q.
    """
    import sympy as sp

    p, q = sp.symbols("p q", positive=True)
    r = p - (p - q) / (4 * q)
    a = sp.Rational(1, 8) * (1 / q - 1 / p)
    minus = (p - q) / (q * (p - 1)) + 1 + p * (q - 1) / (q * (p - 1)) - 2
    plus = 2 * a + 1 + r / p - 2
    literal = 2 * a + 1 + r / q - 2
    res = {
        "minus_symbolic": sp.simplify(minus),
        "plus_symbolic": sp.simplify(plus),
        "plus_literal_symbolic": sp.simplify(literal),
    }
    if samples is None:
        samples = [(pp, qq) for pp in (1.6, 2.0, 3.0, 4.0, 7.5, 12.0) for qq in (1.55, 1.8, 2.0, 2.5, 3.5)
                   if qq < pp]
    fm = sp.lambdify((p, q), minus)
    fp = sp.lambdify((p, q), plus)
    fl = sp.lambdify((p, q), literal)
    res["minus_sampled"] = max(abs(fm(a_, b_)) for a_, b_ in samples)
    res["plus_sampled"] = max(abs(fp(a_, b_)) for a_, b_ in samples)
    res["plus_literal_sampled"] = max(abs(fl(a_, b_)) for a_, b_ in samples)
    return res


@dataclass
class BilinearEstimateReport:
    lhs_minus: float
    rhs_minus: float
    lhs_plus: float
    rhs_plus: float
    flags: list[str] = field(default_factory=list)

    @staticmethod
    def _ratio(l, r):
        if r > 0:
            return l / r
        return math.nan

    @property
    def ratio_minus(self) -> float:
        return self._ratio(self.lhs_minus, self.rhs_minus)

    @property
    def ratio_plus(self) -> float:
        return self._ratio(self.lhs_plus, self.rhs_plus)


def bilinear_estimate_check(f, spec: WeightSpec, quad: CollisionQuadrature, window=None, tol: float = 1e-14,
                  gammas: tuple[np.ndarray, np.ndarray] | None = None) -> BilinearEstimateReport:
    """Both sides of the Gamma-/Gamma+ weighted estimates on a stored trajectory.

    LHS = ||w_{beta-gamma} Gamma(f,f)||_{L^p_v L^inf_t L^inf_x};
    RHS-core = ||w_beta f||^a ||f||^b_{L^inf_t L^inf_x L^1_v} with the estimate's
    exponents.  ``gammas`` may carry precomputed (Gamma-, Gamma+) arrays of
    the trajectory's shape.
    """
    tr = _as_traj(f)
    if spec.q is None:
        raise InputError("bilinear_estimate_check needs q")
    mask = tr.window_mask(window)
    if not mask.any():
        raise InputError("empty time window")
    vals = tr.values[mask]
    if gammas is None:
        gm = np.stack([gamma_minus(PerturbationField(v, tr.grid, tr.domain), quad) for v in vals])
        gp = np.stack([gamma_plus(PerturbationField(v, tr.grid, tr.domain), quad) for v in vals])
    else:
        gm, gp = (np.asarray(a)[mask] for a in gammas)
    bl = spec.beta - quad.params.gamma
    sub = Trajectory(tr.times[mask], gm, tr.grid, tr.domain)
    lhs_m = norm_lp_v_linf_window(sub, spec, beta=bl)
    sub.values = gp
    lhs_p = norm_lp_v_linf_window(sub, spec, beta=bl)
    wnorm = norm_lp_v_linf_window(tr, spec, window)
    l1 = norm_linf_t_linf_x_l1v(tr, window)
    am, bm = exponents_minus(spec.p, spec.q)
    ap, bp = exponents_plus(spec.p, spec.q)
    rhs_m = wnorm ** am * l1 ** bm
    rhs_p = wnorm ** ap * l1 ** bp
    rep = BilinearEstimateReport(lhs_m, rhs_m, lhs_p, rhs_p)
    for name, l, r in (("Gamma-", lhs_m, rhs_m), ("Gamma+", lhs_p, rhs_p)):
        if r == 0.0 and l > tol:
            rep.flags.append(f"{name}: RHS-core vanishes while LHS = {l:.3e}")
    return rep


@dataclass
class NormReport:
    """Norms and defect quantities of one window."""

    lp_v_linf_t_linf_x: float
    lp_v_linf_x: float
    l1x_linfv: float
    linf_t_linf_x_l1v: float
    M0: float
    J0: tuple[float, float, float]
    E0: float
    entropy_functional: float
    flags: tuple[str, ...] = ()

    FIELDS = ("lp_v_linf_t_linf_x", "lp_v_linf_x", "l1x_linfv", "linf_t_linf_x_l1v",
              "M0", "J0_x", "J0_y", "J0_z", "E0", "entropy_functional")

    def row(self) -> list[float]:
        return [self.lp_v_linf_t_linf_x, self.lp_v_linf_x, self.l1x_linfv, self.linf_t_linf_x_l1v,
                self.M0, *self.J0, self.E0, self.entropy_functional]

    def to_text(self) -> str:
        lines = [f"{k}: {v:.12e}" for k, v in zip(self.FIELDS, self.row())]
        if self.flags:
            lines.append("flags: " + "; ".join(self.flags))
        return "\n".join(lines)


def norm_report(tr: Trajectory, spec: WeightSpec, window=None) -> NormReport:
    """Norms over the window; initial-data norms and defects at the window start, entropy at its end."""
    mask = np.flatnonzero(tr.window_mask(window))
    first, last = tr.at(int(mask[0])), tr.at(int(mask[-1]))
    M0, J0, E0 = defects(first)
    return NormReport(
        norm_lp_v_linf_window(tr, spec, window),
        norm_lp_v_linf_x(first, spec),
        norm_l1x_linfv(first),
        norm_linf_t_linf_x_l1v(tr, window),
        M0, tuple(float(x) for x in J0), E0,
        entropy_functional(last),
        tuple(spec.flags),
    )
