import numpy as np
import pytest

from boltzsoft import initial_data
from boltzsoft.errors import InputError
from boltzsoft.norms import WeightSpec, norm_lp_v_linf_x
from boltzsoft.phase_space import SpatialDomain, VelocityGrid

EXPL = WeightSpec(6.0, 4.0, 2.0, "exploratory")
SLAB = SpatialDomain("slab1d", 1.0, 6)


@pytest.mark.parametrize("family", initial_data.FAMILIES)
@pytest.mark.parametrize("domain", [SpatialDomain(), SLAB])
def test_families_give_positive_distributions(grid9, family, domain):
    params = {"seed": 3} if family == "random-smooth" else {}
    if family == "gaussian-bump":
        params["target_norm"] = 1.0
    f0 = initial_data.make(family, grid9, domain, EXPL, **params)
    assert f0.values.shape == (domain.n_cells, grid9.size)
    assert np.all(f0.to_distribution().values >= 0)


@pytest.mark.parametrize("target", [0.1, 0.5, 1.0])
def test_bump_hits_target_norm(grid9, target):
    f0 = initial_data.gaussian_bump(grid9, SLAB, target_norm=target, spec=EXPL)
    assert norm_lp_v_linf_x(f0, EXPL) == pytest.approx(target, rel=1e-12)


def test_random_smooth_reproducible(grid9):
    a = initial_data.random_smooth(grid9, SLAB, seed=11)
    b = initial_data.random_smooth(grid9, SLAB, seed=11)
    c = initial_data.random_smooth(grid9, SLAB, seed=12)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_bimodal_moments():
    g = VelocityGrid(8.0, 17)
    F = initial_data.bimodal(g, separation=3.0).to_distribution().values[0]
    assert g.integrate(F) == pytest.approx(1.0, rel=1e-6)
    assert g.integrate(F * g.nodes[:, 0]) == pytest.approx(0.0, abs=1e-14)
    assert g.integrate(F * g.speed2) == pytest.approx(3.0 + 2.25, rel=1e-6)


@pytest.mark.parametrize("call", [
    lambda g: initial_data.random_smooth(g),
    lambda g: initial_data.random_smooth(g, seed=1, amplitude=0.5),
    lambda g: initial_data.gaussian_bump(g, depth=1.0),
    lambda g: initial_data.gaussian_bump(g, epsilon=-1.0),
    lambda g: initial_data.make("plasma", g),
])
def test_invalid_requests(grid9, call):
    with pytest.raises(InputError):
        call(grid9)
