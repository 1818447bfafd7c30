"""Two-scale sliding partitions: quadratic sum, gradient bounds, selection."""

import numpy as np
import pytest

from semisobolev import geometry as ge
from semisobolev import discretize as dz
from semisobolev import partition as pt
from semisobolev.errors import InvalidScales


@pytest.fixture(scope="module")
def box_form():
    spec = ge.GeometrySpec(domain=ge.plane(3.0), V=1.0, gamma=0.0)
    grid = dz.build_grid(spec, 0.06)
    return spec, grid, dz.assemble(spec, 0.1, grid)


@pytest.fixture(scope="module")
def localized_field(box_form):
    _, grid, _ = box_form
    rng = np.random.default_rng(11)
    psi = dz.gaussian_bump(grid, (0.2, -0.1), 0.8)
    return dz.WaveFunction(grid,
                           psi.values * (1.0 + 0.3 * rng.standard_normal(grid.n_nodes)))


class TestFamily:
    def test_invalid_scales(self):
        with pytest.raises(InvalidScales):
            pt.build_partition(0.2, 0.5, 0.1, 1)
        with pytest.raises(InvalidScales):
            pt.build_partition(0.5, 0.3, 1.5, 1)

    def test_template_plateau_and_support(self):
        fam = pt.build_partition(0.5, 1.0 / 3.0, 0.1, 1)
        x = np.linspace(-fam.plateau, fam.plateau, 11)
        assert np.all(fam.template(x) == 1.0)
        beyond = fam.plateau + fam.layer
        assert np.all(fam.template(np.array([beyond, beyond + 0.1, -beyond])) == 0.0)

    @pytest.mark.parametrize("dim", [1, 2])
    def test_quadratic_sum_identity(self, dim, rng):
        fam = pt.build_partition(0.5, 1.0 / 3.0, 0.1, dim,
                                 tau=rng.uniform(0, 1, dim))
        pts = rng.uniform(-4, 4, size=(10000, dim))
        assert np.abs(fam.sum_sq(pts) - 1.0).max() <= 1e-12

    def test_gradient_bound_h_independent(self, rng):
        pts = rng.uniform(-2, 2, size=(4000, 2))
        consts = []
        for h in (0.1, 0.05, 0.025):
            fam = pt.build_partition(0.5, 1.0 / 3.0, h, 2)
            consts.append(fam.grad_sq_sum(pts).max() * h ** (2 * 0.5))
        consts = np.array(consts)
        assert consts.max() / consts.min() <= 1.2
        assert consts.max() <= 50.0

    def test_cell_gradient_mass_scaling(self):
        alpha, rho, d = 0.5, 1.0 / 3.0, 2
        consts = []
        for h in (0.1, 0.05, 0.025):
            fam = pt.build_partition(alpha, rho, h, d)
            consts.append(fam.cell_grad_mass() / (h ** (rho * d) * h ** (-alpha - rho)))
        consts = np.array(consts)
        assert consts.max() / consts.min() <= 1.6
        assert consts.max() <= 200.0

    def test_translation_covariance(self):
        fam0 = pt.build_partition(0.5, 1.0 / 3.0, 0.1, 1, tau=(0.0,))
        fam1 = pt.build_partition(0.5, 1.0 / 3.0, 0.1, 1, tau=(0.3,))
        x = np.linspace(-1, 1, 101)
        np.testing.assert_allclose(fam1.cell_values(x[:, None], (0,)),
                                   fam0.cell_values((x - 0.3)[:, None], (0,)),
                                   atol=1e-14)


class TestIMS:
    def test_identity_exact(self, box_form, localized_field):
        _, grid, form = box_form
        fam = pt.build_partition(0.5, 1.0 / 3.0, form.h, 2, tau=(0.07, 0.13))
        defect = pt.ims_identity_defect(form, localized_field, fam)
        assert defect <= 1e-10

    def test_identity_magnetic(self, rng):
        spec = ge.GeometrySpec(domain=ge.plane(2.0), V=0.0,
                               A=ge.linear_gauge(ge.field_matrix_2d(1.0)))
        grid = dz.build_grid(spec, 0.08)
        form = dz.assemble(spec, 0.2, grid)
        psi = dz.random_field(grid, rng)
        fam = pt.build_partition(0.5, 0.4, 0.2, 2, tau=(0.02, -0.05))
        assert pt.ims_identity_defect(form, psi, fam) <= 1e-10


class TestTranslationSelection:
    def test_constant_field_accepts_everything(self, box_form):
        _, grid, form = box_form
        ones = dz.WaveFunction(grid, np.ones(grid.n_nodes))
        rep = pt.find_translation(form, ones, 0.5, 1.0 / 3.0, 4.0,
                                  n_samples=40, seed=2)
        assert rep.fraction == 1.0

    def test_localized_field_fraction(self, box_form, localized_field):
        _, _, form = box_form
        rep = pt.find_translation(form, localized_field, 0.5, 1.0 / 3.0, 4.0,
                                  n_samples=200, seed=3)
        assert rep.fraction >= 1.0 / 3.0 - 0.05
        assert rep.accepted >= 1
        assert rep.tau.shape == (2,)

    def test_defect_signs(self, box_form, localized_field):
        # localized L^p mass never exceeds the total (quadratic partition)
        _, grid, form = box_form
        fam = pt.build_partition(0.5, 1.0 / 3.0, form.h, 2, tau=(0.1, 0.1))
        parts = pt.localization_split(form, localized_field, fam)
        w = grid.weight
        loc = sum(float(w @ np.abs(chi * localized_field.values) ** 4)
                  for chi in parts["chi"])
        assert loc <= localized_field.norm_lp(4.0) ** 4 + 1e-12
