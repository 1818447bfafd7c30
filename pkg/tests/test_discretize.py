"""Lattice discretization: grids, links, gauge covariance, diamagnetism."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import dblquad

from semisobolev import geometry as ge
from semisobolev import discretize as dz
from semisobolev.errors import DomainTooSmall, ZeroFunction


@pytest.fixture(scope="module")
def magnetic_form():
    spec = ge.GeometrySpec(domain=ge.half_plane(3.0), V=0.5,
                           A=ge.linear_gauge(ge.field_matrix_2d(1.0)),
                           gamma=-0.3)
    grid = dz.build_grid(spec, 0.1)
    return spec, grid, dz.assemble(spec, 0.5, grid)


class TestGrids:
    def test_unit_square(self):
        spec = ge.GeometrySpec(domain=ge.rectangle(((0, 1), (0, 1))))
        g = dz.build_grid(spec, 0.1)
        assert g.n_nodes == 121
        assert abs(g.weight.sum() - 1.0) <= 1e-12
        assert abs(g.surface_weight.sum() - 4.0) <= 1e-12

    def test_half_space_one_robin_face(self):
        spec = ge.GeometrySpec(domain=ge.half_plane(2.0, 2.0))
        g = dz.build_grid(spec, 0.25)
        hist = g.classification_histogram()
        assert hist["robin"] > 0 and hist["truncation"] > 0
        robin_pts = g.points[g.kind == dz.ROBIN]
        assert np.all(robin_pts[:, 1] == 0.0)
        # truncation corners of the robin face are pinned, not robin
        assert not np.any(np.abs(robin_pts[:, 0]) == 2.0)

    def test_1d_half_line(self):
        spec = ge.GeometrySpec(domain=ge.half_line(5.0))
        g = dz.build_grid(spec, 0.05)
        assert g.kind[0] == dz.ROBIN and g.kind[-1] == dz.TRUNCATION
        assert abs(g.weight.sum() - 5.0) <= 1e-12

    def test_disk_area_and_perimeter(self):
        spec = ge.GeometrySpec(domain=ge.disk(1.0, (0.3, -0.2)))
        g = dz.build_grid(spec, 0.04)
        assert abs(g.weight.sum() - math.pi) <= 1e-10
        assert abs(g.surface_weight.sum() - 2 * math.pi) <= 1e-10

    def test_too_small(self):
        spec = ge.GeometrySpec(domain=ge.rectangle(((0, 1), (0, 1))))
        with pytest.raises(DomainTooSmall):
            dz.build_grid(spec, 0.4)

    def test_dirichlet_gamma_pins_boundary(self):
        spec = ge.GeometrySpec(domain=ge.rectangle(((0, 1), (0, 1))),
                               gamma=ge.DIRICHLET)
        g = dz.build_grid(spec, 0.1)
        assert g.classification_histogram()["robin"] == 0

    def test_truncation_override(self):
        spec = ge.GeometrySpec(domain=ge.plane(4.0))
        g = dz.build_grid(spec, 0.5, truncation=((-8.0, 8.0), (-8.0, 8.0)))
        assert abs(g.weight.sum() - 256.0) <= 1e-9


class TestLinkPhase:
    def test_zero_field(self):
        th = dz.link_phase(None, [[0.0, 0.0]], [[0.1, 0.0]], 0.5)
        assert th[0] == 0.0

    def test_constant_potential_exact(self):
        A = lambda pts: np.tile([0.7, -0.4], (len(np.atleast_2d(pts)), 1))
        th = dz.link_phase(A, [[0.2, 0.3]], [[0.2 + 0.05, 0.3]], 0.25)
        assert_allclose(th[0], 0.7 * 0.05 / 0.25, rtol=1e-14)

    def test_linear_potential_matches_gauss_quadrature(self, rng):
        A = ge.linear_gauge(ge.field_matrix_2d(1.0))
        a = rng.uniform(-1, 1, size=(20, 2))
        b = a + 0.01 * rng.standard_normal((20, 2))
        th = dz.link_phase(A, a, b, 1.0)
        nodes, weights = np.polynomial.legendre.leggauss(64)
        t = (nodes + 1) / 2
        oracle = np.zeros(20)
        for tk, wk in zip(t, weights / 2):
            pts = a + tk * (b - a)
            oracle += wk * np.einsum("ij,ij->i", A(pts), b - a)
        assert np.abs(th - oracle).max() <= 1e-12


class TestAssembleEvaluate:
    def test_constant_function_neumann_zero_energy(self):
        spec = ge.GeometrySpec(domain=ge.rectangle(((0, 1), (0, 1))))
        g = dz.build_grid(spec, 0.1)
        f = dz.assemble(spec, 1.0, g)
        psi = dz.WaveFunction(g, np.ones(g.n_nodes))
        res = dz.evaluate(f, psi, 2.0)
        assert abs(res.energy) <= 1e-12
        assert res.quotient <= 1e-12

    def test_1d_robin_reproduces_linear_eigenvalue(self):
        from semisobolev.minimize import minimize_quotient
        from semisobolev.model1d import linear_eigenvalue
        for c in (-0.5, -0.25):
            spec = ge.GeometrySpec(domain=ge.half_line(30.0), V=1.0, gamma=c)
            g = dz.build_grid(spec, 0.01)
            f = dz.assemble(spec, 1.0, g)
            lam = minimize_quotient(f, 2.0).lam
            assert abs(lam - linear_eigenvalue(c)) <= 5e-5

    def test_zero_function(self):
        spec = ge.GeometrySpec(domain=ge.rectangle(((0, 1), (0, 1))))
        g = dz.build_grid(spec, 0.1)
        f = dz.assemble(spec, 1.0, g)
        with pytest.raises(ZeroFunction):
            dz.evaluate(f, dz.WaveFunction(g, np.zeros(g.n_nodes)), 2.0)

    def test_gaussian_energy_matches_analytic(self):
        # free energy of exp(-|x|^2) on a box that contains its support
        spec = ge.GeometrySpec(domain=ge.plane(5.0), V=0.0)
        exact = dblquad(lambda y, x: 4 * (x * x + y * y) * np.exp(-2 * (x * x + y * y)),
                        -5, 5, -5, 5, epsabs=1e-12)[0]
        errs = []
        for s in (0.1, 0.05):
            g = dz.build_grid(spec, s)
            f = dz.assemble(spec, 1.0, g)
            psi = dz.gaussian_bump(g, (0.0, 0.0), 1.0 / math.sqrt(2.0))
            errs.append(abs(f.energy(psi) - exact))
        assert errs[0] <= 2e-2
        order = math.log2(errs[0] / errs[1])
        assert order >= 1.8

    def test_hermitian_real_energy(self, magnetic_form, rng):
        _, g, f = magnetic_form
        x = f.free_values(dz.random_field(g, rng))
        q = np.vdot(x, f.K @ x)
        assert abs(q.imag) <= 1e-12 * abs(q.real)
        herm = (f.K - f.K.getH()).data
        assert np.abs(herm).max() <= 1e-14 if len(herm) else True

    def test_quotient_mesh_convergence(self):
        # fixed smooth field, Robin box: observed order >= 1.8
        spec = ge.GeometrySpec(domain=ge.rectangle(((0, 1), (0, 1))),
                               V=1.0, gamma=0.4)
        psi_fn = lambda pts: np.exp(pts[:, 0]) * np.cos(1.3 * pts[:, 1])
        vals = []
        for s in (0.04, 0.02, 0.01):
            g = dz.build_grid(spec, s)
            f = dz.assemble(spec, 1.0, g)
            vals.append(dz.evaluate(f, dz.from_callable(g, psi_fn), 4.0).quotient)
        rich = vals[2] + (vals[2] - vals[1]) / 3.0
        e1, e2 = abs(vals[1] - rich), abs(vals[2] - rich)
        assert math.log2(e1 / e2) >= 1.8


class TestGauge:
    def test_constant_phase(self, magnetic_form, rng):
        spec, g, f = magnetic_form
        psi = dz.random_field(g, rng)
        phi = lambda pts: np.full(len(np.atleast_2d(pts)), 1.234)
        fs = dz.assemble(spec, f.h, g, gauge_phi=phi)
        q0 = f.energy(psi)
        q1 = fs.energy(dz.gauge_transform(psi, phi, f.h))
        assert abs(q1 - q0) <= 1e-12 * abs(q0)

    def test_linear_and_random_phases(self, magnetic_form, rng):
        spec, g, f = magnetic_form
        for _ in range(10):
            coef = rng.standard_normal(5)
            phi = lambda pts, c=coef: (
                c[0] * pts[:, 0] + c[1] * pts[:, 1]
                + c[2] * np.sin(pts[:, 0]) * np.cos(pts[:, 1])
                + c[3] * pts[:, 0] * pts[:, 1] + c[4])
            psi = dz.random_field(g, rng)
            fs = dz.assemble(spec, f.h, g, gauge_phi=phi)
            q0 = f.energy(psi)
            q1 = fs.energy(dz.gauge_transform(psi, phi, f.h))
            assert abs(q1 - q0) <= 1e-12 * abs(q0)

    def test_shifted_spec_continuum_limit(self):
        # the continuum shift A -> A + grad(phi) agrees with exact node
        # differences up to the midpoint-rule error O(s^2) per edge
        spec = ge.GeometrySpec(domain=ge.plane(2.0), V=0.0,
                               A=ge.linear_gauge(ge.field_matrix_2d(1.0)))
        phi = lambda pts: np.sin(pts[:, 0]) * pts[:, 1]
        grad_phi = lambda pts: np.stack(
            [np.cos(pts[:, 0]) * pts[:, 1], np.sin(pts[:, 0])], axis=-1)
        sspec = dz.shifted_spec(spec, grad_phi)
        g = dz.build_grid(spec, 0.05)
        f_exact = dz.assemble(spec, 1.0, g, gauge_phi=phi)
        f_cont = dz.assemble(sspec, 1.0, g)
        dth = np.abs(f_exact.edge_phase - f_cont.edge_phase).max()
        assert dth <= 2e-5


class TestDiamagnetic:
    def test_hundred_random_fields(self, magnetic_form, rng):
        _, g, f = magnetic_form
        for _ in range(100):
            psi = dz.random_field(g, rng)
            k_abs = dz.kinetic_energy(f, dz.WaveFunction(g, np.abs(psi.values)),
                                      magnetic=False)
            k_mag = dz.kinetic_energy(f, psi, magnetic=True)
            assert k_abs <= k_mag * (1.0 + 1e-12) + 1e-15


class TestMagneticTranslation:
    def test_lattice_translation_invariance(self):
        b, h = 1.0, 1.0
        spec = ge.GeometrySpec(domain=ge.plane(6.0), V=0.0,
                               A=ge.linear_gauge(ge.field_matrix_2d(b)))
        g = dz.build_grid(spec, 0.2)
        f = dz.assemble(spec, h, g)
        bump = dz.gaussian_bump(g, (-1.0, -0.5), 0.6)
        mask = np.linalg.norm(g.points - [-1.0, -0.5], axis=1) < 3.0
        psi = dz.WaveFunction(g, bump.values * mask)
        x0 = np.array([3 * 0.2, 2 * 0.2])
        A_x0 = 0.5 * (ge.field_matrix_2d(b).T @ x0)
        shift = np.round((g.points - x0) / 0.2).astype(int)
        # build tau psi by index shift (exact lattice translation)
        idx = {(i, j): k for k, (i, j) in
               enumerate(np.round(g.points / 0.2).astype(int))}
        vals = np.zeros(g.n_nodes, dtype=complex)
        for k, (i, j) in enumerate(shift):
            src = idx.get((i, j))
            if src is not None:
                vals[k] = psi.values[src]
        tau_psi = dz.WaveFunction(
            g, np.exp(1j * (g.points @ A_x0) / h) * vals)
        r0 = dz.evaluate(f, psi, 4.0)
        r1 = dz.evaluate(f, tau_psi, 4.0)
        assert abs(r1.quotient / r0.quotient - 1.0) <= 1e-10


class TestExports:
    def test_grid_report(self):
        spec = ge.GeometrySpec(domain=ge.rectangle(((0, 1), (0, 1))))
        g = dz.build_grid(spec, 0.1)
        rep = dz.grid_report(g)
        assert rep["nodes"] == 121
        assert rep["classification"]["robin"] == 40
        assert abs(rep["weight_sum"] - rep["domain_volume"]) < 1e-10

    def test_wavefunction_rows(self):
        spec = ge.GeometrySpec(domain=ge.half_line(5.0))
        g = dz.build_grid(spec, 0.5)
        psi = dz.WaveFunction(g, np.linspace(0, 1, g.n_nodes) * (1 + 1j))
        rows = list(dz.wavefunction_rows(psi))
        assert len(rows) == g.n_nodes
        assert len(rows[0]) == 4  # x, re, im, abs
