"""Half-line Robin model: phase-plane integration against closed forms."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn

from semisobolev import model1d as m1
from semisobolev.errors import NoSolution


def sech_soliton_mass(p: float, half_line: bool = False) -> float:
    """Quadrature oracle for int |soliton|^p (exact Beta-function form)."""
    amp = (p / 2.0) ** (1.0 / (p - 2.0))
    a = (p - 2.0) / 2.0
    s = 2.0 * p / (p - 2.0)
    # int_R sech^s(a r) dr = sqrt(pi) Gamma(s/2) / (a Gamma((s+1)/2))
    full = amp ** p * math.sqrt(math.pi) * gamma_fn(s / 2.0) / (a * gamma_fn((s + 1) / 2.0))
    return full / 2.0 if half_line else full


class TestHamiltonian:
    def test_origin_is_critical(self):
        assert m1.hamiltonian(0.0, 0.0, 4.0) == 0.0

    def test_soliton_peak_on_zero_level(self):
        assert_allclose(m1.hamiltonian(math.sqrt(2.0), 0.0, 4.0), 0.0, atol=1e-15)

    @pytest.mark.parametrize("c", [-0.9, -0.3, 0.0, 0.5, 0.95])
    @pytest.mark.parametrize("p", [3.0, 4.0, 6.0])
    def test_initial_data_on_zero_level(self, c, p):
        u0 = m1.initial_amplitude(c, p)
        assert_allclose(m1.hamiltonian(u0, c * u0, p), 0.0, atol=1e-14)


class TestInitialAmplitude:
    def test_neumann_p4(self):
        assert_allclose(m1.initial_amplitude(0.0, 4.0), math.sqrt(2.0), rtol=1e-15)

    def test_vanishes_as_c_to_one(self):
        vals = [m1.initial_amplitude(c, 4.0) for c in (0.9, 0.99, 0.999)]
        assert vals[0] > vals[1] > vals[2] > 0.0
        assert vals[2] < 0.07

    @pytest.mark.parametrize("c", [1.0, -1.0, 1.7])
    def test_no_solution_beyond_one(self, c):
        with pytest.raises(NoSolution):
            m1.initial_amplitude(c, 4.0)


class TestSolitonOracle:
    @pytest.mark.parametrize("p", [3.0, 4.0, 6.0])
    def test_ode_residual_self_check(self, p):
        r = np.linspace(-8.0, 8.0, 100)
        assert np.abs(m1.soliton_ode_residual(r, p)).max() <= 1e-9

    def test_p4_is_sqrt2_sech(self):
        r = np.linspace(0.0, 10.0, 50)
        assert_allclose(m1.soliton(r, 4.0), math.sqrt(2.0) / np.cosh(r), rtol=1e-13)


class TestTrajectory:
    def test_matches_sech_soliton(self):
        traj = m1.integrate_trajectory(0.0, 4.0)
        exact = m1.soliton(traj.r, 4.0)
        assert np.abs(traj.u - exact).max() <= 1e-8

    @pytest.mark.parametrize("c,p", [(0.0, 4.0), (0.5, 4.0), (-0.9, 3.0), (0.9, 6.0)])
    def test_energy_conservation(self, c, p):
        traj = m1.integrate_trajectory(c, p)
        assert traj.energy_drift <= 1e-10

    def test_positivity(self):
        traj = m1.integrate_trajectory(0.5, 4.0)
        assert np.all(traj.u > 0.0)

    def test_monotone_decay_after_turning(self):
        traj = m1.integrate_trajectory(0.7, 4.0)
        amp = np.abs(traj.u) + np.abs(traj.v)
        tail = amp[traj.turning_index:]
        assert np.all(np.diff(tail) <= 1e-12)
        # the turning point sits in the O(1) region, not in the decay tail
        assert amp[traj.turning_index] >= 0.3 * amp.max()

    def test_shift_property(self):
        c, cp = 0.5, 0.0
        tc = m1.integrate_trajectory(c, 4.0)
        tcp = m1.integrate_trajectory(cp, 4.0)
        T = m1.crossing_time(tc, cp)
        # closed form for p = 4: T = arctanh(c)
        assert_allclose(T, math.atanh(c), atol=1e-10)
        ts = np.linspace(0.0, 5.0, 200)
        uc = np.array([tc._dense(T + t)[0] for t in ts])
        ucp = np.array([tcp._dense(t)[0] for t in ts])
        assert np.abs(uc - ucp).max() <= 1e-6


class TestLambdaC:
    def test_neumann_value_vs_quadrature_oracle(self):
        # independent oracle: adaptive quadrature of the closed-form soliton
        oracle_mass, err = quad(lambda r: (math.sqrt(2.0) / math.cosh(r)) ** 4,
                                0.0, 40.0, epsabs=1e-13)
        assert err < 1e-7
        assert_allclose(oracle_mass, 8.0 / 3.0, rtol=1e-12)
        lam = m1.lambda_c(0.0, 4.0)
        assert abs(lam - oracle_mass ** 0.5) <= 1e-6
        assert_allclose(lam, 4.0 / math.sqrt(6.0), atol=1e-6)

    @pytest.mark.parametrize("p", [3.0, 4.0, 6.0])
    def test_strictly_increasing(self, p):
        cs = np.linspace(-0.9, 0.9, 13)
        vals = [m1.lambda_c(c, p) for c in cs]
        assert np.all(np.diff(vals) > 0.0)

    def test_limit_c_to_one(self):
        lam = m1.lambda_c(0.999, 4.0)
        assert abs(lam / (4.0 / math.sqrt(3.0)) - 1.0) <= 0.01

    def test_limit_c_to_minus_one(self):
        assert m1.lambda_c(-0.999, 4.0) <= 0.01 * m1.soliton_line(4.0)

    @pytest.mark.parametrize("p", [3.0, 4.0, 6.0])
    def test_sandwich(self, p):
        line = m1.soliton_line(p)
        for c in (-0.8, 0.0, 0.8):
            lam = m1.lambda_c(c, p)
            assert 0.0 < lam < line

    def test_no_solution(self):
        with pytest.raises(NoSolution):
            m1.lambda_c(1.0, 4.0)
        with pytest.raises(NoSolution):
            m1.lambda_c(-1.5, 4.0)

    def test_point_diagnostics(self):
        pt = m1.lambda_c_point(0.5, 4.0)
        assert_allclose(pt.t_escape, math.atanh(0.5), atol=1e-9)
        assert pt.u0 == pytest.approx(m1.initial_amplitude(0.5, 4.0))
        lim = m1.lambda_c_point(0.9995, 4.0)
        assert lim.limited and lim.lam == pytest.approx(m1.soliton_line(4.0))


class TestSolitonLine:
    @pytest.mark.parametrize("p", [3.0, 4.0, 6.0])
    def test_against_beta_function_oracle(self, p):
        oracle = sech_soliton_mass(p) ** ((p - 2.0) / p)
        assert_allclose(m1.soliton_line(p), oracle, rtol=1e-10)

    def test_p4_closed_form(self):
        assert abs(m1.soliton_line(4.0) - 4.0 / math.sqrt(3.0)) <= 1e-9

    @pytest.mark.parametrize("p", [3.0, 4.0, 6.0])
    def test_half_line_relation(self, p):
        # the c = 0 trajectory is half of the symmetric soliton
        assert_allclose(m1.soliton_line(p),
                        2.0 ** (1.0 - 2.0 / p) * m1.lambda_c(0.0, p), rtol=1e-8)


class TestLinearEigenvalue:
    def test_values(self):
        assert m1.linear_eigenvalue(-0.5) == pytest.approx(0.75)
        assert m1.linear_eigenvalue(0.0) == 1.0
        assert m1.linear_eigenvalue(0.7) == 1.0
        assert m1.linear_eigenvalue(-1.0) == 0.0
        assert m1.linear_eigenvalue(-2.0) == 0.0
