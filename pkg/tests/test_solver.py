import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boltzsoft import initial_data
from boltzsoft.collision import DistributionField, PerturbationField
from boltzsoft.errors import InputError, PositivityViolationError, SolverDivergenceError
from boltzsoft.norms import WeightSpec, defects
from boltzsoft.phase_space import SpatialDomain, VelocityGrid
from boltzsoft.solver import (
    SolverConfig,
    compute_T1,
    local_solve,
    mild_residual,
    picard_iterate,
    shift,
    time_march,
)
from boltzsoft.trajectory import Trajectory

EXPL = WeightSpec(6.0, 4.0, 2.0, "exploratory")
SLAB = SpatialDomain("slab1d", 1.0, 8)


def test_T1_examples(grid9):
    z = PerturbationField.zeros(grid9)
    assert compute_T1(z, EXPL) == pytest.approx(1 / 6)
    assert compute_T1(z, EXPL, C1=2.0) == pytest.approx(1 / 12)
    f = initial_data.gaussian_bump(grid9, target_norm=1.0, spec=EXPL)
    assert compute_T1(f, EXPL) == pytest.approx(1 / 12)
    with pytest.raises(InputError):
        compute_T1(z, EXPL, C1=0.0)


@pytest.mark.parametrize("kw", [{"picard_tol": 0.0}, {"picard_max_iters": 1}, {"C1": -1.0},
                                {"substeps": 1}, {"horizon": 0.0}, {"positivity_tol": -1.0},
                                {"physics": "magic"}])
def test_config_validation(kw):
    with pytest.raises(InputError):
        SolverConfig(**kw)


def test_zero_is_fixed_point(quad9, grid9):
    z = PerturbationField.zeros(grid9, SLAB)
    tr, trace = local_solve(z, quad9, SolverConfig(), EXPL)
    assert trace.converged and trace.iterations == 1
    assert np.all(tr.values == 0.0)
    res = time_march(z, 3, quad9, SolverConfig(), EXPL)
    assert np.all(res.trajectory.values == 0.0)
    assert res.entropy == [0.0] * 4


def test_first_iterate_is_damped_transport(quad9, grid9):
    f0 = initial_data.gaussian_bump(grid9, SLAB, target_norm=0.5, spec=EXPL)
    times = np.linspace(0.0, 0.1, 5)
    f1 = picard_iterate(Trajectory.zeros(times, grid9, SLAB), f0, quad9)
    for k, t in enumerate(times):
        expected = np.exp(-quad9.nu * t) * shift(f0.values, t, grid9, SLAB)
        np.testing.assert_allclose(f1.values[k], expected, rtol=1e-13, atol=1e-300)


def test_transport_residual(quad9, grid9):
    f0 = initial_data.gaussian_bump(grid9, SLAB, target_norm=0.5, spec=EXPL)
    cfg = SolverConfig(physics="transport")
    tr, trace = local_solve(f0, quad9, cfg, EXPL)
    assert trace.iterations <= 2
    assert mild_residual(tr, f0, quad9, cfg) <= 1e-10


def test_free_transport_conserves_cell_sums(quad9, grid9, rng):
    f0 = PerturbationField(0.1 * grid9.sqrt_mu * rng.uniform(0, 1, (8, grid9.size)), grid9, SLAB)
    tr, _ = local_solve(f0, quad9, SolverConfig(physics="free"), EXPL)
    for k in range(tr.n_times):
        np.testing.assert_allclose(tr.values[k].sum(axis=0), f0.values.sum(axis=0), rtol=1e-13)
        np.testing.assert_array_equal(tr.values[k], shift(f0.values, tr.times[k], grid9, SLAB))


def test_shift_exact_for_whole_cells(grid9, rng):
    vals = rng.normal(size=(8, grid9.size))
    node = int(np.flatnonzero(np.all(grid9.nodes == [2.0, 0.0, 0.0], axis=1))[0])
    out = shift(vals, 0.0625, grid9, SLAB)  # 2 * 0.0625 = one cell of width 1/8
    np.testing.assert_allclose(out[:, node], np.roll(vals[:, node], 1), atol=1e-15)
    np.testing.assert_array_equal(shift(vals, 0.0, grid9, SLAB), vals)


@given(st.floats(0.0, 3.0))
@settings(max_examples=30, deadline=None)
def test_shift_preserves_sign_and_period(tau):
    g = VelocityGrid(8.0, 5)
    vals = np.random.default_rng(0).uniform(0, 1, (8, g.size))
    out = shift(vals, tau, g, SLAB)
    assert np.all(out >= 0)
    np.testing.assert_allclose(out.sum(axis=0), vals.sum(axis=0), rtol=1e-12)


def test_bimodal_iterates_stay_positive(quad9, grid9):
    f0 = initial_data.bimodal(grid9)
    times = np.linspace(0.0, 0.1, 5)
    cur = Trajectory.zeros(times, grid9, f0.domain)
    for _ in range(4):
        cur = picard_iterate(cur, f0, quad9)
        F = grid9.mu + grid9.sqrt_mu * cur.values
        assert F.min() >= -1e-10 * F.max()


def test_local_solve_converges_with_small_residual(quad9, grid9):
    f0 = initial_data.gaussian_bump(grid9, SLAB, target_norm=0.5, spec=EXPL)
    cfg = SolverConfig()
    tr, trace = local_solve(f0, quad9, cfg, EXPL)
    assert trace.converged
    assert all(r <= 0.9 for r in trace.ratios[1:])
    assert mild_residual(tr, f0, quad9, cfg) <= 10 * cfg.picard_tol
    rows = trace.rows()
    assert len(rows) == trace.iterations and rows[0][0] == 1


def test_defects_drift_is_small(quad13, grid13):
    f0 = initial_data.gaussian_bump(grid13, target_norm=0.5, spec=EXPL)
    tr, _ = local_solve(f0, quad13, SolverConfig(), EXPL)
    M_start, _, E_start = defects(tr.at(0))
    M_end, _, E_end = defects(tr.at(tr.n_times - 1))
    scale = grid13.quad_weight * np.abs(grid13.sqrt_mu * f0.values).sum()
    assert abs(M_end - M_start) <= 5e-2 * scale
    assert abs(E_end - E_start) <= 5e-2 * scale * 10


def test_divergence_reports_trace(quad9, grid9):
    f0 = initial_data.gaussian_bump(grid9, target_norm=0.5, spec=EXPL)
    with pytest.raises(SolverDivergenceError) as exc:
        local_solve(f0, quad9, SolverConfig(picard_tol=1e-300, picard_max_iters=2), EXPL)
    assert exc.value.trace.iterations == 2


def test_negative_data_rejected(quad9, grid9):
    f0 = PerturbationField(-2.0 * grid9.sqrt_mu, grid9)  # F0 = -mu
    with pytest.raises(PositivityViolationError):
        local_solve(f0, quad9, SolverConfig(), EXPL)


def test_march_records_entropy(quad9, grid9):
    f0 = initial_data.gaussian_bump(grid9, target_norm=0.5, spec=EXPL)
    res = time_march(f0, 2, quad9, SolverConfig(), EXPL)
    assert len(res.entropy) == 3 and len(res.reports) == 2
    assert res.entropy_nonincreasing
    assert res.trajectory.times[0] == 0.0
    assert np.all(np.diff(res.trajectory.times) > 0)
    with pytest.raises(InputError):
        time_march(f0, 0, quad9)


def test_linear_physics_keeps_null_space_data(quad9, grid9):
    f0 = PerturbationField(0.1 * grid9.sqrt_mu, grid9)  # F0 = 1.1 mu, in the null space
    tr, trace = local_solve(f0, quad9, SolverConfig(physics="linear"), EXPL)
    inner = np.sqrt(grid9.speed2) <= grid9.extent / 2
    np.testing.assert_allclose(tr.values[-1][:, inner], f0.values[:, inner], rtol=1e-6)


def test_global_bound_fitted_constant(quad9, grid9):
    ratios = []
    for target in (0.1, 0.3, 1.0):
        f0 = initial_data.gaussian_bump(grid9, target_norm=target, spec=EXPL)
        res = time_march(f0, 2, quad9, SolverConfig(), EXPL)
        M = max(1.0, target)
        ratios.append(max(r.lp_v_linf_t_linf_x for r in res.reports) / M ** 2)
    C2 = max(ratios)
    assert math.isfinite(C2) and C2 <= 2.2
