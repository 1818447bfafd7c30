"""Quotient minimization: gradients, eigen paths, flow behavior."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from semisobolev import geometry as ge
from semisobolev import discretize as dz
from semisobolev import model1d as m1
from semisobolev.minimize import (MinimizeOptions, el_residual,
                                  minimize_quotient, quotient_gradient)


@pytest.fixture(scope="module")
def robin_1d():
    spec = ge.GeometrySpec(domain=ge.half_line(18.0), V=1.0, gamma=0.0)
    grid = dz.build_grid(spec, 0.01)
    return spec, grid, dz.assemble(spec, 1.0, grid)


@pytest.fixture(scope="module")
def magnetic_2d():
    spec = ge.GeometrySpec(domain=ge.half_plane(5.0, 5.0), V=0.0,
                           A=ge.linear_gauge(ge.field_matrix_2d(1.0)),
                           gamma=0.0)
    grid = dz.build_grid(spec, 0.2)
    return spec, grid, dz.assemble(spec, 1.0, grid)


class TestGradient:
    def test_vanishes_at_eigenstate(self, robin_1d):
        _, g, f = robin_1d
        res = minimize_quotient(f, 2.0)
        gr = quotient_gradient(f, res.psi, 2.0)
        norm = math.sqrt(float(np.real(np.sum(g.weight * np.abs(gr.values) ** 2))))
        assert norm <= 1e-7

    def test_finite_difference_pairing(self, magnetic_2d, rng):
        _, g, f = magnetic_2d
        psi = dz.random_field(g, rng)
        delta = dz.random_field(g, rng)
        gr = quotient_gradient(f, psi, 4.0)
        eps = 1e-6
        qp = dz.evaluate(f, dz.WaveFunction(g, psi.values + eps * delta.values), 4.0).quotient
        qm = dz.evaluate(f, dz.WaveFunction(g, psi.values - eps * delta.values), 4.0).quotient
        num = (qp - qm) / (2 * eps)
        ana = float(np.real(np.sum(g.weight * np.conj(gr.values) * delta.values)))
        assert abs(num - ana) <= 1e-6 * max(1.0, abs(num))

    def test_minus_one_homogeneous(self, magnetic_2d, rng):
        _, g, f = magnetic_2d
        psi = dz.random_field(g, rng)
        g1 = quotient_gradient(f, psi, 4.0)
        g2 = quotient_gradient(f, dz.WaveFunction(g, 3.0 * psi.values), 4.0)
        assert_allclose(g2.values, g1.values / 3.0, rtol=1e-11, atol=1e-13)


class TestMinimize1D:
    def test_p4_matches_model1d_under_refinement(self):
        errs = []
        for s in (0.02, 0.01):
            spec = ge.GeometrySpec(domain=ge.half_line(18.0), V=1.0, gamma=0.0)
            g = dz.build_grid(spec, s)
            f = dz.assemble(spec, 1.0, g)
            res = minimize_quotient(f, 4.0, MinimizeOptions(
                grad_tol=1e-9, restarts=1, seed=0, centers=((0.0,),)))
            errs.append(abs(res.lam - m1.lambda_c(0.0, 4.0)))
        assert errs[-1] <= 1e-3
        assert errs[1] < errs[0]

    def test_robin_p4_against_model(self):
        spec = ge.GeometrySpec(domain=ge.half_line(16.0), V=1.0, gamma=-0.4)
        g = dz.build_grid(spec, 0.01)
        f = dz.assemble(spec, 1.0, g)
        res = minimize_quotient(f, 4.0, MinimizeOptions(
            grad_tol=1e-9, restarts=1, centers=((0.0,),)))
        assert abs(res.lam - m1.lambda_c(-0.4, 4.0)) <= 2e-4

    def test_result_contract(self, robin_1d):
        _, _, f = robin_1d
        res = minimize_quotient(f, 4.0, MinimizeOptions(
            grad_tol=1e-8, restarts=1, centers=((0.0,),)))
        assert res.converged
        assert abs(res.psi.norm_lp(4.0) - 1.0) <= 1e-12
        assert res.el_residual <= 10.0 * 1e-8 * max(1.0, res.lam)
        assert res.lam > 0


class TestMinimize2D:
    def test_constant_potential_p2(self):
        # Dirichlet truncation adds the exact box kinetic offset 2 (pi/2L)^2
        spec = ge.GeometrySpec(domain=ge.plane(10.0), V=1.0)
        g = dz.build_grid(spec, 0.25)
        f = dz.assemble(spec, 1.0, g)
        lam = minimize_quotient(f, 2.0).lam
        offset = 2.0 * (math.pi / 20.0) ** 2
        assert abs(lam - 1.0) <= 2.0 * offset
        assert lam > 1.0

    def test_p2_flow_cross_check(self, magnetic_2d, rng):
        _, g, f = magnetic_2d
        eig = minimize_quotient(f, 2.0, MinimizeOptions(seed=1))
        from semisobolev.minimize import _descend
        x0 = (rng.standard_normal(f.n) + 1j * rng.standard_normal(f.n))
        R, _, _, _ = _descend(f, x0, 2.0, MinimizeOptions(grad_tol=1e-10,
                                                          max_iters=4000))
        assert abs(R - eig.lam) <= 1e-8 * max(1.0, abs(eig.lam))

    def test_phase_invariance_of_initialization(self, magnetic_2d):
        _, g, f = magnetic_2d
        bump = dz.gaussian_bump(g, (0.0, 0.0), 0.8)
        r1 = minimize_quotient(f, 4.0, MinimizeOptions(
            grad_tol=1e-9, inits=(bump.values.astype(complex),)))
        r2 = minimize_quotient(f, 4.0, MinimizeOptions(
            grad_tol=1e-9, inits=(np.exp(1j * 0.77) * bump.values,)))
        assert abs(r1.lam - r2.lam) <= 1e-10 * max(1.0, r1.lam)

    def test_monotone_iterates(self, magnetic_2d):
        _, g, f = magnetic_2d
        res = minimize_quotient(f, 4.0, MinimizeOptions(
            grad_tol=1e-8, restarts=0, centers=((0.0, 0.0),),
            track_history=True))
        hist = np.array(res.history)
        assert len(hist) > 3
        assert np.all(np.diff(hist) <= 1e-12 * np.maximum(1.0, np.abs(hist[:-1])))

    def test_variational_upper_bound(self, magnetic_2d, rng):
        _, g, f = magnetic_2d
        res = minimize_quotient(f, 4.0, MinimizeOptions(
            grad_tol=1e-8, restarts=1, centers=((0.0, 0.0),)))
        for _ in range(5):
            trial = dz.random_field(g, rng)
            assert res.lam <= dz.evaluate(f, trial, 4.0).quotient + 1e-8

    def test_restart_stability_translation_invariant(self):
        # whole-line soliton valley is flat: every restart reaches the
        # same value
        spec = ge.GeometrySpec(domain=ge.line(10.0), V=1.0)
        g = dz.build_grid(spec, 0.02)
        f = dz.assemble(spec, 1.0, g)
        res = minimize_quotient(f, 4.0, MinimizeOptions(
            grad_tol=1e-9, restarts=3, seed=4, max_iters=6000))
        vals = np.array(res.restart_values)
        assert (vals.max() - vals.min()) / vals.min() <= 1e-4


class TestResidual:
    def test_eigenpair_residual(self, robin_1d):
        _, _, f = robin_1d
        res = minimize_quotient(f, 2.0)
        assert el_residual(f, res.lam, res.psi, 2.0) <= 1e-8

    def test_perturbation_grows_linearly(self, robin_1d, rng):
        _, g, f = robin_1d
        res = minimize_quotient(f, 4.0, MinimizeOptions(
            grad_tol=1e-10, restarts=1, centers=((0.0,),)))
        noise = rng.standard_normal(g.n_nodes)
        rs = []
        for eps in (1e-5, 2e-5, 4e-5):
            pert = dz.WaveFunction(g, res.psi.values + eps * noise)
            pert = dz.WaveFunction(g, pert.values / pert.norm_lp(4.0))
            rs.append(el_residual(f, res.lam, pert, 4.0))
        assert rs[0] > 10 * res.el_residual
        assert_allclose(rs[1] / rs[0], 2.0, rtol=0.15)
        assert_allclose(rs[2] / rs[1], 2.0, rtol=0.15)

    def test_zero_function(self, robin_1d):
        _, g, f = robin_1d
        from semisobolev.errors import ZeroFunction
        with pytest.raises(ZeroFunction):
            quotient_gradient(f, dz.WaveFunction(g, np.zeros(g.n_nodes)), 4.0)
