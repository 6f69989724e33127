"""Acceptance suite behind ``boltzsoft verify``.

Each criterion yields report rows ``criterion_id status measured bound anchor``.
``status`` is PASS/FAIL for gated rows and INFO for reported-only values.
The report holds no timings or paths, so identical configurations give
byte-identical reports whatever the thread count.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import initial_data
from .collision import (
    CollisionQuadrature,
    DistributionField,
    PerturbationField,
    collision_operator,
    conservation_defect,
    q_gain,
)
from .config import RunConfig
from .errors import BoltzsoftError
from .linop import PowerProbe, apply_K, sweep_m, verify_l_bounds
from .norms import (
    WeightSpec,
    entropy_functional,
    exponent_identities,
    relative_entropy_gap,
    bilinear_estimate_check,
    norm_lp_v_linf_window,
    norm_lp_v_linf_x,
)
from .phase_space import SpatialDomain, VelocityGrid
from .solver import SolverConfig, local_solve, picard_iterate, time_march
from .trajectory import Trajectory

log = logging.getLogger(__name__)

CONSERVATION_TOL = 5e-3
BALANCE_TOL = 1e-3
NULL_SPACE_TOL = 5e-2
SLOPE_REL_TOL = 0.2
SPREAD_TOL = 3.0
LE_FACTOR = 2.0 * 1.1
CONTRACTION_TOL = 0.9
MAX_ITERS = 20
POSITIVITY_TOL = 1e-10
ENTROPY_TOL = 10 * CONSERVATION_TOL
STABILITY_TOL = 0.5
IDENTITY_TOL = 1e-14
ROUNDOFF_FLOOR = 1e-12

ANCHORS = {
    1: "collision-invariants",
    2: "detailed-balance",
    3: "null-space-identity",
    4: "Km-pointwise-scaling",
    5: "kernel-bound-decay",
    6: "local-existence-bound",
    7: "picard-contraction",
    8: "positivity-propagation",
    9: "entropy-inequality",
    10: "relative-entropy-control",
    11: "bilinear-estimate-stability",
    12: "exponent-homogeneity",
    13: "determinism",
}


def _num(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6e}"


@dataclass(frozen=True)
class Row:
    cid: str
    status: str
    measured: float
    bound: float
    anchor: str

    def line(self) -> str:
        return f"{self.cid} {self.status} {_num(self.measured)} {_num(self.bound)} {self.anchor}"


def _gate(num: int, ok: bool, measured: float, bound: float, suffix: str = "") -> Row:
    return Row(f"C{num:02d}{suffix}", "PASS" if ok else "FAIL", measured, bound, ANCHORS[num])


def _info(num: int, suffix: str, measured: float, bound: float = math.nan) -> Row:
    return Row(f"C{num:02d}{suffix}", "INFO", measured, bound, ANCHORS[num])


@dataclass
class Context:
    """Shared, lazily built state of one verification run."""

    cfg: RunConfig
    threads: int = 1
    _quads: dict = field(default_factory=dict)
    _runs: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)

    def quad(self, n: int) -> CollisionQuadrature:
        if n not in self._quads:
            grid = VelocityGrid(self.cfg.grid.extent, n)
            self._quads[n] = CollisionQuadrature(grid, self.cfg.sphere, self.cfg.kernel, self.threads,
                                                 self.cfg.interpolation)
        return self._quads[n]

    @property
    def v(self) -> dict:
        return self.cfg.verify

    @property
    def theorem(self) -> WeightSpec:
        w = self.cfg.weight
        return w if w.mode == "theorem" else WeightSpec(w.beta, w.p, w.q, "exploratory", w.gamma)

    @property
    def exploratory(self) -> WeightSpec:
        return self.cfg.exploratory_weight()

    def solver_config(self) -> SolverConfig:
        s = self.cfg.solver
        return SolverConfig(s.horizon, s.substeps, s.picard_tol, MAX_ITERS, s.C1, s.positivity_tol, "full")

    # -- solver runs shared by criteria 6-10 -------------------------------
    def bump_runs(self) -> list[dict]:
        if "bump" not in self._runs:
            quad = self.quad(self.v["solver_n"])
            runs = []
            for label, spec in (("theorem", self.theorem), ("exploratory", self.exploratory)):
                for target in self.v["norms"]:
                    f0 = initial_data.gaussian_bump(quad.grid, target_norm=target, spec=spec)
                    log.info("local solve: %s weights, ||w f0|| = %g", label, target)
                    rec = {"label": label, "target": target, "spec": spec, "f0": f0}
                    try:
                        tr, trace = local_solve(f0, quad, self.solver_config(), spec)
                        rec.update(traj=tr, trace=trace, error=None)
                    except BoltzsoftError as exc:
                        rec.update(traj=None, trace=getattr(exc, "trace", None), error=exc)
                    runs.append(rec)
            self._runs["bump"] = runs
        return self._runs["bump"]

    def bimodal_run(self) -> dict:
        if "bimodal" not in self._runs:
            quad = self.quad(self.v["solver_n"])
            f0 = initial_data.bimodal(quad.grid, separation=self.cfg.initial["separation"])
            cfg = self.solver_config()
            times = np.linspace(0.0, min(cfg.horizon, 0.1), cfg.substeps + 1)
            cur = Trajectory.zeros(times, quad.grid, f0.domain)
            mins, err = [], None
            log.info("bimodal positivity iterates")
            try:
                for _ in range(4):
                    cur = picard_iterate(cur, f0, quad, cfg)
                    F = cur.F()
                    mins.append(float(F.min() / F.max()))
            except BoltzsoftError as exc:
                err = exc
            self._runs["bimodal"] = {"min_F": mins, "error": err, "traj": cur, "f0": f0}
        return self._runs["bimodal"]

    def march(self) -> dict:
        if "march" not in self._runs:
            quad = self.quad(self.v["solver_n"])
            spec = self.exploratory
            f0 = initial_data.gaussian_bump(quad.grid, target_norm=self.v["march_norm"], spec=spec)
            log.info("time march: %d windows", self.cfg.windows)
            try:
                res = time_march(f0, self.cfg.windows, quad, self.solver_config(), spec)
                self._runs["march"] = {"result": res, "error": None, "f0": f0}
            except BoltzsoftError as exc:
                self._runs["march"] = {"result": None, "error": exc, "f0": f0}
        return self._runs["march"]


# ---------------------------------------------------------------------------
# criteria

def _random_F(grid: VelocityGrid, seed: int) -> DistributionField:
    return initial_data.random_smooth(grid, seed=seed, amplitude=0.3).to_distribution()


def c01(ctx: Context) -> list[Row]:
    res = {}
    for n in (ctx.v["coarse_n"], ctx.v["n"]):
        quad = ctx.quad(n)
        worst = 0.0
        for i in range(ctx.v["random_fields"]):
            log.info("conservation: n = %d, field %d", n, i)
            worst = max(worst, float(np.max(conservation_defect(_random_F(quad.grid, ctx.v["seed"] + i), quad))))
        res[n] = worst
    fine, coarse = res[ctx.v["n"]], res[ctx.v["coarse_n"]]
    ok = fine <= CONSERVATION_TOL and fine < coarse
    return [_gate(1, ok, fine, CONSERVATION_TOL), _info(1, "-coarse", coarse)]


def c02(ctx: Context) -> list[Row]:
    quad = ctx.quad(ctx.v["n"])
    F = DistributionField.maxwellian(quad.grid)
    Q = collision_operator(F, quad)
    Qp = q_gain(F, F, quad)
    val = float(np.max(np.abs(Q)) / np.max(Qp))
    return [_gate(2, val <= BALANCE_TOL, val, BALANCE_TOL)]


def _null_space_errors(quad: CollisionQuadrature) -> np.ndarray:
    """max_{|v| <= L/2} |K(phi sqrt mu) - nu phi sqrt mu| / max |nu phi sqrt mu| for phi = 1, v_1, v_2, v_3, |v|^2."""
    g = quad.grid
    idx = g.speed <= 0.5 * g.extent + 1e-12
    out = []
    for phi in (np.ones(g.size), *g.nodes.T, g.speed2):
        f = PerturbationField((phi * g.sqrt_mu)[None], g)
        ref = quad.nu * f.values[0]
        out.append(float(np.max(np.abs(apply_K(f, quad)[0] - ref)[idx]) / np.max(np.abs(ref))))
    return np.array(out)


def c03(ctx: Context) -> list[Row]:
    # the sqrt(mu) identity is exact in the scheme up to roundoff, so refinement
    # is judged on the whole invariant family (dominated by |v|^2 sqrt(mu))
    fine = _null_space_errors(ctx.quad(ctx.v["n"]))
    coarse = _null_space_errors(ctx.quad(ctx.v["coarse_n"]))
    decreasing = fine.max() < coarse.max() or max(fine.max(), coarse.max()) <= ROUNDOFF_FLOOR
    return [_gate(3, fine[0] <= NULL_SPACE_TOL and decreasing, fine[0], NULL_SPACE_TOL),
            _info(3, "-coarse", coarse[0]),
            _info(3, "-invariants", fine.max(), NULL_SPACE_TOL),
            _info(3, "-invariants-coarse", coarse.max(), NULL_SPACE_TOL)]


def c04(ctx: Context) -> list[Row]:
    sw = ctx.cfg.sweep
    probe = PowerProbe.for_exponent(sw["p"], sw["delta"])
    log.info("K^m sweep over %s", sw["m_list"])
    res = sweep_m(sw["m_list"], ctx.cfg.kernel, sw["p"], probe)
    ctx.artifacts["sweep"] = res
    return [_gate(4, res.passed(SLOPE_REL_TOL), res.slope, res.target),
            _info(4, "-relerr", res.relative_error, SLOPE_REL_TOL)]


def c05(ctx: Context) -> list[Row]:
    quad = ctx.quad(ctx.v["n"])
    m = ctx.cfg.kernel.m_cutoff
    rows = []
    rep = verify_l_bounds(quad.grid, 0.0, m, ctx.cfg.kernel, quad)
    # (1 + |v|) times the weighted integral of the pointwise kernel bound; the
    # bounds for K and K^c share the same majorant, so one integral serves both
    s2 = rep.spread(rep.prol2)
    finite = all(math.isfinite(x) and x > 0 for x in rep.prol2)
    rows.append(_gate(5, finite and s2 < SPREAD_TOL, s2, SPREAD_TOL))
    rows.append(_info(5, "-shape-nu", rep.spread(rep.prol1)))
    for beta in (ctx.exploratory.beta, ctx.theorem.beta):
        r = verify_l_bounds(quad.grid, beta, m, ctx.cfg.kernel, quad)
        rows.append(_info(5, f"-beta{beta:g}", r.spread(r.prol2), math.inf))
    return rows


def c06(ctx: Context) -> list[Row]:
    rows = []
    for label in ("theorem", "exploratory"):
        runs = [r for r in ctx.bump_runs() if r["label"] == label]
        worst = 0.0
        for r in runs:
            if r["traj"] is None:
                worst = math.inf
                continue
            worst = max(worst, norm_lp_v_linf_window(r["traj"], r["spec"]) / norm_lp_v_linf_x(r["f0"], r["spec"]))
        rows.append(_gate(6, worst <= LE_FACTOR, worst, LE_FACTOR, f"-{label}"))
    return rows


def c07(ctx: Context) -> list[Row]:
    rows = []
    for label in ("theorem", "exploratory"):
        runs = [r for r in ctx.bump_runs() if r["label"] == label]
        worst, iters, ok = 0.0, 0, True
        for r in runs:
            tr = r["trace"]
            if r["error"] is not None or tr is None or not tr.converged:
                ok = False
                iters = max(iters, tr.iterations if tr is not None else MAX_ITERS + 1)
                continue
            iters = max(iters, tr.iterations)
            # the first ratio compares against the difference from the zero iterate
            later = tr.ratios[1:]
            if later:
                worst = max(worst, max(later))
        ok = ok and worst <= CONTRACTION_TOL and iters <= MAX_ITERS
        rows.append(_gate(7, ok, worst, CONTRACTION_TOL, f"-{label}"))
        rows.append(_info(7, f"-{label}-iterations", iters, MAX_ITERS))
    return rows


def c08(ctx: Context) -> list[Row]:
    mins = []
    failed = False
    for r in ctx.bump_runs():
        if r["trace"] is not None:
            mins.extend(r["trace"].min_F)
        failed |= r["error"] is not None and "Positivity" in type(r["error"]).__name__
    bi = ctx.bimodal_run()
    mins.extend(bi["min_F"])
    failed |= bi["error"] is not None
    m = ctx.march()
    if m["result"] is not None:
        for tr in m["result"].traces:
            mins.extend(tr.min_F)
    worst = min(mins) if mins else math.nan
    ok = (not failed) and bool(mins) and worst >= -POSITIVITY_TOL
    return [_gate(8, ok, worst, -POSITIVITY_TOL), _info(8, "-bimodal", min(bi["min_F"]) if bi["min_F"] else math.nan)]


def c09(ctx: Context) -> list[Row]:
    m = ctx.march()
    res = m["result"]
    if res is None:
        return [_gate(9, False, math.inf, ENTROPY_TOL)]
    e0 = res.entropy[0]
    rel = res.entropy_violation / e0 if e0 > 0 else (0.0 if res.entropy_violation == 0 else math.inf)
    drop = (res.entropy[0] - res.entropy[-1]) / e0 if e0 > 0 else 0.0
    return [_gate(9, rel <= ENTROPY_TOL, rel, ENTROPY_TOL), _info(9, "-relative-decrease", drop)]


def c10(ctx: Context) -> list[Row]:
    worst = 0.0
    trajs = [(r["traj"], r["f0"]) for r in ctx.bump_runs() if r["traj"] is not None]
    m = ctx.march()
    if m["result"] is not None:
        trajs.append((m["result"].trajectory, m["f0"]))
    for tr, f0 in trajs:
        rhs = relative_entropy_gap(f0)[1]
        for k in range(tr.n_times):
            lhs = relative_entropy_gap(tr.at(k), f0)[0]
            worst = max(worst, lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf))
    bound = 1.0 + ENTROPY_TOL
    return [_gate(10, bool(trajs) and worst <= bound, worst, bound)]


def _bilinear_ratios(ctx: Context, n: int, specs: list[WeightSpec]) -> list[list[tuple[float, float]]]:
    quad = ctx.quad(n)
    g = quad.grid
    k = ctx.v["fields"]
    F = np.stack([initial_data.random_smooth(g, seed=ctx.v["seed"] + 1000 + i, amplitude=0.3).values[0]
                  for i in range(k)])
    log.info("bilinear estimates: n = %d, %d fields", n, k)
    gp = g.sqrt_mu * quad.gain(F / g.sqrt_mu)
    gm = F * quad.convolve(g.sqrt_mu * F)
    out = []
    for spec in specs:
        per = []
        for i in range(k):
            tr = Trajectory(np.zeros(1), F[i][None, None], g, SpatialDomain())
            rep = bilinear_estimate_check(tr, spec, quad, gammas=(gm[i][None, None], gp[i][None, None]))
            per.append((rep.ratio_minus, rep.ratio_plus))
        out.append(per)
    return out


def c11(ctx: Context) -> list[Row]:
    specs = [ctx.theorem, ctx.exploratory]
    coarse = _bilinear_ratios(ctx, ctx.v["coarse_n"], specs)
    fine = _bilinear_ratios(ctx, ctx.v["n"], specs)
    ctx.artifacts["bilinear"] = {"coarse": coarse, "fine": fine}
    rows = []
    for j, (spec, label) in enumerate(zip(specs, ("theorem", "exploratory"))):
        change = 0.0
        for side in (0, 1):
            a = max(r[side] for r in coarse[j])
            b = max(r[side] for r in fine[j])
            finite = math.isfinite(a) and math.isfinite(b) and a > 0
            change = max(change, abs(b / a - 1.0) if finite else math.inf)
            rows.append(_info(11, f"-{label}-{'minus' if side == 0 else 'plus'}-max-ratio", b))
        if label == "theorem":
            rows.insert(0, _gate(11, change < STABILITY_TOL, change, STABILITY_TOL))
        else:
            rows.append(_info(11, "-exploratory-change", change, STABILITY_TOL))
    return rows


def c12(ctx: Context) -> list[Row]:
    res = exponent_identities()
    sym_ok = res["minus_symbolic"] == 0 and res["plus_symbolic"] == 0
    val = max(res["minus_sampled"], res["plus_sampled"])
    measured = val if sym_ok else math.inf
    return [_gate(12, measured <= IDENTITY_TOL, measured, IDENTITY_TOL),
            _info(12, "-literal-r-over-q", res["plus_literal_sampled"], IDENTITY_TOL)]


def c13(ctx: Context) -> list[Row]:
    """Thread-count independence of the batched kernels (bitwise)."""
    grid = VelocityGrid(ctx.cfg.grid.extent, 9)
    X = np.stack([initial_data.random_smooth(grid, seed=ctx.v["seed"] + i).ratio()[0] for i in range(4)])
    a = CollisionQuadrature(grid, ctx.cfg.sphere, ctx.cfg.kernel, 1, ctx.cfg.interpolation).gain(X)
    b = CollisionQuadrature(grid, ctx.cfg.sphere, ctx.cfg.kernel, max(2, ctx.threads),
                            ctx.cfg.interpolation).gain(X)
    diff = float(np.max(np.abs(a - b)))
    return [_gate(13, diff == 0.0, diff, 0.0)]


CRITERIA = {1: c01, 2: c02, 3: c03, 4: c04, 5: c05, 6: c06, 7: c07, 8: c08, 9: c09, 10: c10, 11: c11,
            12: c12, 13: c13}


def run(cfg: RunConfig, threads: int = 1, criteria=None) -> tuple[list[Row], Context]:
    ctx = Context(cfg, threads)
    rows: list[Row] = []
    for cid in sorted(set(criteria or cfg.verify["criteria"])):
        log.info("criterion %d", cid)
        rows.extend(CRITERIA[cid](ctx))
    return rows, ctx


def report_lines(rows: list[Row]) -> list[str]:
    header = "# criterion_id status measured bound anchor"
    return [header] + [r.line() for r in rows]


def all_passed(rows: list[Row]) -> bool:
    return all(r.status != "FAIL" for r in rows)
