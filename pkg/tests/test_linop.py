import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boltzsoft.collision import CollisionQuadrature, PerturbationField
from boltzsoft.errors import InputError, SingularPointError
from boltzsoft.linop import (
    CutoffProfile,
    PowerProbe,
    apply_K,
    apply_Kc,
    apply_Km,
    fit_loglog_slope,
    kernel_k_bound,
    kernel_l_bound,
    km_point,
    lattice_km_evaluator,
    sweep_m,
    target_slope,
    verify_l_bounds,
)
from boltzsoft.phase_space import KernelParams, SphereQuadrature, VelocityGrid, maxwellian

vec = st.lists(st.floats(-4, 4, allow_nan=False), min_size=3, max_size=3).map(np.array)


def _interior(grid):
    return np.sqrt(grid.speed2) <= grid.extent / 2


def test_zero_maps_to_zero(quad9, grid9):
    z = PerturbationField.zeros(grid9)
    assert np.all(apply_K(z, quad9) == 0.0)
    assert np.all(apply_Km(z, quad9, CutoffProfile(0.5)) == 0.0)


@pytest.mark.parametrize("which", ["one", "v1", "v2"])
def test_null_space_identity(quad13, grid13, which):
    phi = {"one": np.ones(grid13.size), "v1": grid13.nodes[:, 0], "v2": grid13.nodes[:, 1]}[which]
    f = PerturbationField(phi * grid13.sqrt_mu, grid13)
    K = apply_K(f, quad13)[0]
    ref = quad13.nu * f.values[0]
    inner = _interior(grid13)
    assert np.max(np.abs(K - ref)[inner]) <= 1e-6 * np.max(np.abs(ref))


def test_energy_invariant_improves_with_refinement(sphere, params):
    errs = []
    for n in (13, 17):
        g = VelocityGrid(8.0, n)
        q = CollisionQuadrature(g, sphere, params)
        f = PerturbationField(g.speed2 * g.sqrt_mu, g)
        ref = q.nu * f.values[0]
        errs.append(np.max(np.abs(apply_K(f, q)[0] - ref)[_interior(g)]) / np.max(np.abs(ref)))
    assert errs[1] < errs[0] < 5e-2


def test_linearity(quad9, grid9, rng):
    f = PerturbationField(rng.normal(size=grid9.size) * grid9.sqrt_mu, grid9)
    g = PerturbationField(rng.normal(size=grid9.size) * grid9.sqrt_mu, grid9)
    a = 2.5
    lhs = apply_K(PerturbationField(a * f.values + g.values, grid9), quad9)
    rhs = a * apply_K(f, quad9) + apply_K(g, quad9)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * np.abs(rhs).max())


@pytest.mark.parametrize("m", [0.1, 0.5, 1.0])
def test_split_identity(quad9, grid9, rng, m):
    f = PerturbationField(rng.normal(size=grid9.size) * grid9.sqrt_mu, grid9)
    prof = CutoffProfile(m)
    K = apply_K(f, quad9)
    np.testing.assert_allclose(apply_Km(f, quad9, prof) + apply_Kc(f, quad9, prof), K,
                               atol=1e-12 * np.abs(K).max())


def test_large_cutoff_covers_everything(rng):
    # diameter of the box is 2 sqrt(3) * 0.1, so m = 1 exceeds twice of it
    g = VelocityGrid(0.1, 3)
    q = CollisionQuadrature(g, SphereQuadrature(4), KernelParams())
    f = PerturbationField(rng.normal(size=g.size), g)
    prof = CutoffProfile(1.0)
    np.testing.assert_allclose(apply_Km(f, q, prof), apply_K(f, q), rtol=1e-14, atol=0)
    assert np.all(apply_Kc(f, q, prof) == 0.0)


def test_small_cutoff_remainder_carries_null_space_identity(quad13, grid13):
    f = PerturbationField(grid13.sqrt_mu, grid13)
    prof = CutoffProfile(0.05)
    Kc = apply_Kc(f, quad13, prof)[0]
    ref = quad13.nu * grid13.sqrt_mu - apply_Km(f, quad13, prof)[0]
    inner = _interior(grid13)
    assert np.max(np.abs(Kc - ref)[inner]) <= 1e-6 * np.max(np.abs(ref))


def test_grid_mismatch(quad9):
    with pytest.raises(InputError):
        apply_K(PerturbationField.zeros(VelocityGrid(8.0, 7)), quad9)


@given(st.floats(0.01, 1.0), st.floats(0.0, 5.0))
@settings(max_examples=100, deadline=None)
def test_cutoff_profile_shape(m, tau):
    chi = CutoffProfile(m)
    assert chi(m) == 1.0 and chi(2 * m) == 0.0
    assert 0.0 <= chi(tau) <= 1.0
    assert chi(tau) >= chi(tau + 0.01)


def test_cutoff_profile_is_c1():
    chi = CutoffProfile(0.3)
    eps = 1e-6
    for edge in (0.3, 0.6):
        left = (chi(edge) - chi(edge - eps)) / eps
        right = (chi(edge + eps) - chi(edge)) / eps
        assert abs(left) < 1e-4 and abs(right) < 1e-4


@pytest.mark.parametrize("m", [0.0, -0.1, 1.5])
def test_cutoff_profile_rejects(m):
    with pytest.raises(InputError):
        CutoffProfile(m)


def test_kernel_bound_example():
    p = KernelParams()
    assert kernel_k_bound([1, 0, 0], [0, 0, 0], p) == pytest.approx(2 * math.exp(-0.25), rel=1e-15)
    assert kernel_l_bound([1, 0, 0], [0, 0, 0], p) == kernel_k_bound([1, 0, 0], [0, 0, 0], p)


def test_kernel_bound_equal_speeds():
    p = KernelParams()
    v, eta = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
    r = math.sqrt(2)
    expected = r ** -1 * math.exp(-0.5) + r ** -2 * math.exp(-0.25)
    assert kernel_k_bound(v, eta, p) == pytest.approx(expected, rel=1e-14)


@given(vec, vec)
@settings(max_examples=100, deadline=None)
def test_kernel_bound_symmetric_positive(v, eta):
    if np.linalg.norm(v - eta) < 1e-3:
        return
    p = KernelParams()
    a = kernel_k_bound(v, eta, p)
    assert a == kernel_k_bound(eta, v, p)
    assert a > 0


def test_kernel_bound_singular():
    with pytest.raises(SingularPointError):
        kernel_k_bound([1, 2, 3], [1, 2, 3], KernelParams())


@pytest.mark.parametrize("beta", [0.0, 10.0])
def test_l_bounds_bounded_for_both_weights(grid9, quad9, params, beta):
    rep = verify_l_bounds(grid9, beta, 1.0, params, quad9)
    assert not rep.empty
    for name in ("prol1", "prol2", "prol4", "gaussian_tail"):
        hi, lo = getattr(rep, name)
        assert math.isfinite(hi) and hi > 0 and lo > 0


def test_l_bounds_flat_decay_without_weight(params):
    g = VelocityGrid(8.0, 13)
    rep = verify_l_bounds(g, 0.0, 1.0, params)
    assert rep.spread(rep.prol2) < 3.0


def test_l_bounds_degenerate_split(params):
    g = VelocityGrid(0.1, 3)
    rep = verify_l_bounds(g, 0.0, 1.0, params)
    assert rep.empty
    assert np.all(rep.integral == 0.0)


def test_target_slope_examples():
    assert target_slope(-1.0, 4.0) == pytest.approx(1.25)
    assert target_slope(-0.5, math.inf) == pytest.approx(2.5)
    assert target_slope(-1.0, 2.0) == pytest.approx(0.5)


def test_fit_exact_power_law():
    m = np.array([0.4, 0.2, 0.1, 0.05])
    slope, flat = fit_loglog_slope(m, 3.0 * m ** 1.7)
    assert slope == pytest.approx(1.7, rel=1e-12) and not flat


def test_fit_flags_constant_series():
    slope, flat = fit_loglog_slope([0.4, 0.2, 0.1], [2.0, 2.0, 2.0])
    assert flat
    res = sweep_m([0.4, 0.2, 0.1], KernelParams(), 4.0, evaluator=lambda m: 1.0)
    assert res.non_scaling and not res.passed()


@pytest.mark.parametrize("ms", [[0.4, 0.2], [0.1, 0.2, 0.05], [0.4, 0.4, 0.1]])
def test_sweep_rejects_bad_lists(ms):
    with pytest.raises(InputError):
        sweep_m(ms, KernelParams(), 4.0, evaluator=lambda m: m)


def _km_monte_carlo(probe, m, params, samples=400_000, seed=11):
    """Plain Monte Carlo of (K^m f)(v0) for a locally constant probe (a = 0)."""
    rng = np.random.default_rng(seed)
    v0 = np.asarray(probe.v0)
    R = 2 * m
    sq = lambda x: (2 * math.pi) ** -0.75 * np.exp(-0.25 * np.sum(x * x, axis=-1))
    # u - v0 = r zeta with density ~ r^{2 + gamma} on [0, R]
    e = 3.0 + params.gamma
    r = R * rng.random(samples) ** (1.0 / e)
    zeta = rng.normal(size=(samples, 3))
    zeta /= np.linalg.norm(zeta, axis=1)[:, None]
    om = rng.normal(size=(samples, 3))
    om /= np.linalg.norm(om, axis=1)[:, None]
    z = r[:, None] * zeta
    u = v0 + z
    t = np.abs(np.sum(zeta * om, axis=1))
    s = np.sum(z * om, axis=1)[:, None] * om
    vp, up = v0 + s, u - s
    integrand = params.b0 * t * CutoffProfile(m)(r) * sq(u) * (sq(up) + sq(vp) - sq(v0))
    norm = 4 * math.pi * R ** e / e * 4 * math.pi
    return norm * integrand.mean()


def test_km_point_matches_monte_carlo(params):
    probe = PowerProbe.for_exponent(math.inf)
    val = km_point(probe, 0.2, params)
    assert val == pytest.approx(_km_monte_carlo(probe, 0.2, params), rel=0.02)


def test_km_point_quadrature_converged(params):
    probe = PowerProbe.for_exponent(4.0)
    a = km_point(probe, 0.1, params, nr=16, nt=16, zeta_order=16, nphi=16)
    b = km_point(probe, 0.1, params)
    assert a == pytest.approx(b, rel=1e-6)


def test_sweep_slope_smooth_probe(params):
    res = sweep_m([0.4, 0.2, 0.1, 0.05], params, math.inf)
    assert res.target == pytest.approx(2.0)
    assert res.passed(0.2)


def test_lattice_evaluator_runs(quad9):
    ev = lattice_km_evaluator(quad9, PowerProbe.for_exponent(4.0))
    assert ev(1.0) >= ev(0.4) >= 0.0
