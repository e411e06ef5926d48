import math

import numpy as np
import pytest

from patternfit import forces
from patternfit.params import Control, ForceParams

from conftest import random_controls, random_displacements


class TestWrapDisplacement:
    def test_identity_in_range(self):
        assert np.allclose(forces.wrap_displacement([0.0, 0.0]), [0.0, 0.0])
        assert np.allclose(forces.wrap_displacement([0.3, -0.2]), [0.3, -0.2])

    def test_integer_shift(self):
        np.testing.assert_allclose(forces.wrap_displacement([0.7, -0.6]), [-0.3, 0.4])

    def test_half_open_boundary(self):
        # exactly 0.5 maps to -0.5; -0.5 stays
        np.testing.assert_array_equal(forces.wrap_displacement([0.5, -0.5]), [-0.5, -0.5])

    def test_range_always_half_open(self, rng):
        raw = rng.uniform(-7, 7, size=(5000, 2))
        w = forces.wrap_displacement(raw)
        assert np.all(w >= -0.5) and np.all(w < 0.5)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            forces.wrap_displacement([np.nan, 0.0])
        with pytest.raises(ValueError):
            forces.wrap_displacement([np.inf, 0.0])


class TestRotationMatrix:
    def test_zero_is_identity(self):
        np.testing.assert_allclose(forces.rotation_matrix(0.0), np.eye(2))

    def test_quarter_turn(self):
        np.testing.assert_allclose(forces.rotation_matrix(np.pi / 2),
                                   [[0, -1], [1, 0]], atol=1e-15)

    def test_half_turn(self):
        np.testing.assert_allclose(forces.rotation_matrix(np.pi),
                                   [[-1, 0], [0, -1]], atol=1e-15)

    def test_orthogonal_det_one(self, rng):
        for theta in rng.uniform(-10, 10, size=50):
            R = forces.rotation_matrix(theta)
            np.testing.assert_allclose(R @ R.T, np.eye(2), atol=1e-14)
            assert abs(np.linalg.det(R) - 1.0) < 1e-14


class TestCoefficients:
    def test_repulsion_at_zero_is_beta(self, default_params):
        assert forces.repulsion_coeff(0.0, default_params) == pytest.approx(0.1, abs=0)

    def test_attraction_at_zero_vanishes(self, default_params):
        assert forces.attraction_coeff(0.0, default_params) == 0.0

    def test_values_at_001(self, default_params):
        # direct high-precision evaluation of the closed forms
        expected_rep = (270.0 * 1e-4 + 0.1) * math.exp(-1.0)
        expected_att = -35.0 * 0.01 * math.exp(-0.95)
        assert forces.repulsion_coeff(0.01, default_params) == pytest.approx(expected_rep, rel=1e-14)
        assert forces.attraction_coeff(0.01, default_params) == pytest.approx(expected_att, rel=1e-14)
        # frozen digits
        assert forces.repulsion_coeff(0.01, default_params) == pytest.approx(0.046721, abs=5e-7)
        assert forces.attraction_coeff(0.01, default_params) == pytest.approx(-0.135359, abs=5e-7)

    def test_signs(self, default_params, rng):
        s = rng.random(200) * 2.0
        assert np.all(forces.repulsion_coeff(s, default_params) >= 0)
        assert np.all(forces.attraction_coeff(s, default_params) <= 0)

    def test_rejects_negative_distance(self, default_params):
        with pytest.raises(ValueError):
            forces.repulsion_coeff(-0.1, default_params)
        with pytest.raises(ValueError):
            forces.attraction_coeff(-1e-9, default_params)

    def test_coefficient_primes_match_fd(self, default_params, rng):
        s = 0.001 + rng.random(300)
        h = 1e-7
        fd_rep = (forces.repulsion_coeff(s + h, default_params)
                  - forces.repulsion_coeff(s - h, default_params)) / (2 * h)
        fd_att = (forces.attraction_coeff(s + h, default_params)
                  - forces.attraction_coeff(s - h, default_params)) / (2 * h)
        np.testing.assert_allclose(forces.repulsion_coeff_prime(s, default_params), fd_rep,
                                   rtol=1e-5, atol=1e-12)
        np.testing.assert_allclose(forces.attraction_coeff_prime(s, default_params), fd_att,
                                   rtol=1e-5, atol=1e-12)


class TestTotalForce:
    def test_zero_displacement_zero_force(self, default_params, rng):
        for u in random_controls(rng, 5, default_params):
            np.testing.assert_array_equal(
                forces.total_force(np.zeros(2), u, default_params), np.zeros(2))

    def test_isotropy_at_chi_one(self, rng):
        p = ForceParams(chi=1.0)
        d = random_displacements(rng, 100)
        f1 = forces.total_force(d, Control(0.3, 1.0), p)
        f2 = forces.total_force(d, Control(2.1, 1.0), p)
        np.testing.assert_allclose(f1, f2, atol=1e-15)

    def test_along_pattern_axis_value(self, default_params):
        # displacement along the preferred direction: anisotropy drops out
        u = Control(0.0, 1.0)
        f = forces.total_force(np.array([0.01, 0.0]), u, default_params)
        rep = (270.0 * 1e-4 + 0.1) * math.exp(-1.0)
        att = -35.0 * 0.01 * math.exp(-0.95)
        expected = (rep + att) * 0.01
        assert f[1] == pytest.approx(0.0, abs=1e-18)
        assert f[0] == pytest.approx(expected, rel=1e-12)
        assert f[0] == pytest.approx(-8.8638e-4, abs=1e-8)

    def test_transverse_axis_scales_attraction_by_chi(self, default_params):
        # transverse to the pattern direction the attraction carries chi
        u = Control(0.0, 1.0)
        f = forces.total_force(np.array([0.0, 0.01]), u, default_params)
        rep = (270.0 * 1e-4 + 0.1) * math.exp(-1.0)
        att = -35.0 * 0.01 * math.exp(-0.95)
        expected = (rep + default_params.chi * att) * 0.01
        assert f[0] == pytest.approx(0.0, abs=1e-18)
        assert f[1] == pytest.approx(expected, rel=1e-12)

    def test_periodicity_under_integer_shifts(self, default_params, rng):
        d = random_displacements(rng, 500, r_max=0.45)
        u = Control(0.7, 1.05)
        shifts = rng.integers(-3, 4, size=(500, 2)).astype(float)
        base = forces.total_force(forces.wrap_displacement(d), u, default_params)
        shifted = forces.total_force(forces.wrap_displacement(d + shifts), u, default_params)
        np.testing.assert_allclose(shifted, base, atol=1e-15)

    def test_antisymmetry(self, default_params, rng):
        d = random_displacements(rng, 500)
        u = Control(1.2, 0.95)
        f_pos = forces.total_force(d, u, default_params)
        f_neg = forces.total_force(-d, u, default_params)
        np.testing.assert_array_equal(f_neg, -f_pos)

    def test_pi_periodicity_in_theta(self, default_params, rng):
        d = random_displacements(rng, 200)
        for theta in rng.uniform(-5, 5, size=5):
            f1 = forces.total_force(d, Control(theta, 1.0), default_params)
            f2 = forces.total_force(d, Control(theta + np.pi, 1.0), default_params)
            np.testing.assert_allclose(f2, f1, atol=1e-15)


def fd_jacobian(d, u, p, h=1e-6):
    jac = np.empty(d.shape + (2,))
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        jac[..., :, k] = (forces.total_force(d + e, u, p)
                          - forces.total_force(d - e, u, p)) / (2 * h)
    return jac


class TestJacobianPosition:
    def test_limit_at_zero(self, default_params):
        # analytic limit eta*beta*I; attraction part vanishes
        u = Control(0.77, 1.0)
        jac = forces.force_jacobian_position(np.zeros(2), u, default_params)
        np.testing.assert_allclose(jac, 0.1 * np.eye(2), atol=1e-15)
        # formula stays FD-consistent arbitrarily close to the origin ...
        d = np.array([1e-5, 0.0])
        near = forces.force_jacobian_position(d, u, default_params)
        fd = fd_jacobian(d, u, default_params, h=1e-7)
        np.testing.assert_allclose(near, fd, atol=1e-7)
        # ... and approaches the limit linearly (slopes of order gamma)
        assert np.max(np.abs(near - jac)) < 1e-3

    def test_even_in_d(self, default_params, rng):
        d = random_displacements(rng, 200)
        u = Control(0.4, 1.02)
        j_pos = forces.force_jacobian_position(d, u, default_params)
        j_neg = forces.force_jacobian_position(-d, u, default_params)
        np.testing.assert_array_equal(j_pos, j_neg)

    def test_matches_finite_differences(self, default_params, rng):
        d = random_displacements(rng, 300)
        for u in random_controls(rng, 3, default_params):
            analytic = forces.force_jacobian_position(d, u, default_params)
            fd = fd_jacobian(d, u, default_params)
            num = np.linalg.norm(analytic - fd, axis=(-2, -1))
            den = np.maximum(np.linalg.norm(fd, axis=(-2, -1)), 1e-300)
            assert np.max(num / den) < 1e-6


class TestGradControl:
    def test_zero_at_chi_one_theta_component(self, rng):
        p = ForceParams(chi=1.0)
        d = random_displacements(rng, 200)
        d_theta, _ = forces.force_grad_control(d, Control(0.9, 1.0), p)
        np.testing.assert_allclose(d_theta, 0.0, atol=1e-16)

    def test_zero_displacement(self, default_params):
        d_theta, d_eta = forces.force_grad_control(np.zeros(2), Control(0.3, 1.0), default_params)
        np.testing.assert_array_equal(d_theta, np.zeros(2))
        np.testing.assert_array_equal(d_eta, np.zeros(2))

    def test_matches_finite_differences(self, default_params, rng):
        d = random_displacements(rng, 300)
        h = 1e-6
        for u in random_controls(rng, 3, default_params):
            d_theta, d_eta = forces.force_grad_control(d, u, default_params)
            fd_theta = (forces.total_force(d, Control(u.theta + h, u.eta), default_params)
                        - forces.total_force(d, Control(u.theta - h, u.eta), default_params)) / (2 * h)
            fd_eta = (forces.total_force(d, Control(u.theta, u.eta + h), default_params)
                      - forces.total_force(d, Control(u.theta, u.eta - h), default_params)) / (2 * h)
            for analytic, fd in ((d_theta, fd_theta), (d_eta, fd_eta)):
                num = np.linalg.norm(analytic - fd, axis=-1)
                den = np.maximum(np.linalg.norm(fd, axis=-1), 1e-300)
                assert np.max(num / den) < 1e-6


class TestForceParamsValidation:
    def test_defaults_are_reference_values(self, default_params):
        assert default_params.alpha == 270.0
        assert default_params.beta == 0.1
        assert default_params.gamma == 35.0
        assert default_params.e_r == 100.0
        assert default_params.e_a == 95.0
        assert default_params.chi == 0.2
        assert (default_params.eta_min, default_params.eta_max) == (0.9, 1.1)

    def test_chi_bounds(self):
        with pytest.raises(ValueError):
            ForceParams(chi=1.2)
        with pytest.raises(ValueError):
            ForceParams(chi=-0.1)

    def test_eta_box_ordering(self):
        with pytest.raises(ValueError):
            ForceParams(eta_min=1.1, eta_max=0.9)
        with pytest.raises(ValueError):
            ForceParams(eta_min=0.0)
