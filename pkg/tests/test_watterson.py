"""Tests for the double-recessive-null model closed forms."""
import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from genedup import watterson
from genedup.errors import ParameterError, SingularProjectionError
from genedup.numerics import central_diff, central_diff2
from genedup.schemas import WattersonParams
from genedup.watterson import WState

MU = 1e-4


def _ito_coefficients(x, y):
    """Drift and variance of x* - y* from finite differences of the projection.

    The noise is diag(x(1 - x), y(1 - y)) and the generator (1/2) a d^2 + b d.
    """
    def h(u, v):
        return watterson.projection_difference(u, v, MU)

    hx = central_diff(lambda u: h(u, y), x, 1e-5 * x)
    hy = central_diff(lambda v: h(x, v), y, 1e-5 * y)
    hxx = central_diff2(lambda u: h(u, y), x, 1e-3 * x)
    hyy = central_diff2(lambda v: h(x, v), y, 1e-3 * y)
    ax, ay = x * (1.0 - x), y * (1.0 - y)
    return 0.5 * (ax * hxx + ay * hyy), ax * hx * hx + ay * hy * hy


class TestProjection(unittest.TestCase):
    def test_g_at_known_ratio(self):
        self.assertAlmostEqual(watterson.g_eval(0.2, MU), 0.802492, delta=1e-6)

    def test_project_known_point(self):
        point = watterson.project_w(WState(0.9, 0.5), MU)
        self.assertAlmostEqual(point.x_star, 0.802492, delta=1e-6)
        self.assertAlmostEqual(point.y_star, 0.012461, delta=1e-6)
        self.assertAlmostEqual(point.x_star * point.y_star, 0.01, places=12)
        self.assertAlmostEqual((1.0 - point.x_star) / (1.0 - point.y_star), 0.2, places=12)

    def test_projection_is_idempotent(self):
        rng = np.random.default_rng(3)
        for x, y in rng.uniform(0.01, 0.99, size=(20, 2)):
            once = watterson.project_w(WState(x, y), MU)
            twice = watterson.project_w(once.as_state(), MU)
            self.assertLess(abs(once.x_star - twice.x_star), 1e-10)
            self.assertLess(abs(once.y_star - twice.y_star), 1e-10)

    def test_boundary_lines(self):
        self.assertEqual(watterson.project_w(WState(0.3, 1.0), MU).y_star, 1.0)
        self.assertEqual(watterson.project_w(WState(1.0, 0.3), MU).x_star, 1.0)
        self.assertAlmostEqual(watterson.g_eval(float("inf"), MU), 0.01)

    def test_corner_is_singular(self):
        with self.assertRaises(SingularProjectionError):
            watterson.project_w(WState(1.0, 1.0), MU)

    def test_invalid_inputs(self):
        with self.assertRaises(ParameterError):
            watterson.g_eval(-0.5, MU)
        with self.assertRaises(ParameterError):
            watterson.g_eval(0.5, 1.5)
        with self.assertRaises(ParameterError):
            WState(1.2, 0.5)

    def test_derivatives_match_finite_differences(self):
        for u in (0.05, 0.3, 1.0, 2.5, 15.0):
            g1 = watterson.g_prime(u, MU)
            g2 = watterson.g_second(u, MU)
            fd1 = central_diff(lambda t: watterson.g_eval(t, MU), u, 1e-5 * u)
            fd2 = central_diff2(lambda t: watterson.g_eval(t, MU), u, 1e-4 * u)
            self.assertLess(abs(g1 - fd1) / abs(g1), 1e-6)
            self.assertLess(abs(g2 - fd2) / abs(g2), 1e-4)

    def test_vectorized_g_matches_scalar(self):
        u = np.array([0.1, 1.0, 4.0])
        vec = watterson.g_eval(u, MU)
        self.assertEqual(vec.shape, (3,))
        for i, value in enumerate(u):
            self.assertEqual(vec[i], watterson.g_eval(float(value), MU))


class TestField(unittest.TestCase):
    def test_field_vanishes_on_curve(self):
        for x, y in watterson.curve_samples(MU, 25):
            fx, fy = watterson.ode_field_w(WState(x, y), WattersonParams(mu=MU))
            self.assertLess(abs(fx) + abs(fy), 1e-15)

    def test_array_field_matches_scalar(self):
        state = np.array([[0.4, 0.7], [0.9, 0.1]])
        arr = watterson.field_array(state, MU)
        for row, (x, y) in zip(arr, state):
            np.testing.assert_allclose(row, watterson.ode_field_w(WState(x, y), WattersonParams(mu=MU)))

    def test_lyapunov_identity(self):
        for x, y in ((0.3, 0.4), (0.9, 0.05), (0.05, 0.95)):
            lhs, rhs = watterson.directional_derivative_identity(WState(x, y), MU)
            self.assertAlmostEqual(lhs, rhs, places=15)
            self.assertLessEqual(lhs, 0.0)
            rate = 4.0 * x * y * (y * (1.0 - x) + x * (1.0 - y))
            self.assertAlmostEqual(rhs, -rate * watterson.lyapunov_phi(WState(x, y), MU), places=18)
        self.assertAlmostEqual(watterson.lyapunov_phi(WState(0.1, 0.1), MU), 0.0, places=20)

    def test_lyapunov_rate_bound(self):
        self.assertEqual(watterson.lyapunov_rate_bound(MU, 10_000, 0.3), 0.0)
        self.assertGreater(watterson.lyapunov_rate_bound(0.01, 10**6, 0.45), 0.0)


class TestCurve(unittest.TestCase):
    def test_samples_lie_on_curve(self):
        pts = watterson.curve_samples(MU, 200)
        np.testing.assert_allclose(pts[:, 0] * pts[:, 1], 0.01, atol=1e-12, rtol=0)
        lo, hi = watterson.interval_w(MU)
        self.assertAlmostEqual(pts[0, 0] - pts[0, 1], lo)
        self.assertAlmostEqual(pts[-1, 0] - pts[-1, 1], hi)

    def test_curve_point_of_z(self):
        point = watterson.curve_point_of_z(0.0, MU)
        self.assertAlmostEqual(point.x_star, 0.1, places=14)
        self.assertAlmostEqual(point.z, 0.0, places=14)

    def test_flow_line_ends_on_projection(self):
        line = watterson.flow_line(WState(0.9, 0.5), MU, n=11)
        np.testing.assert_allclose(line[0], [0.9, 0.5])
        self.assertAlmostEqual(line[-1, 0], 0.802492, delta=1e-6)
        # Flow lines point away from the corner (1, 1).
        ratios = (1.0 - line[:, 0]) / (1.0 - line[:, 1])
        np.testing.assert_allclose(ratios, 0.2, rtol=1e-12)

    def test_flow_fan_size(self):
        fan = watterson.flow_fan(MU, 7, n=5)
        self.assertEqual(len(fan), 7)
        self.assertEqual(fan[0].shape, (5, 2))


class TestLimitCoefficients(unittest.TestCase):
    def test_symmetric_point(self):
        drift, var = watterson.limit_coeffs_w(0.0, MU)
        self.assertAlmostEqual(drift, 0.0, places=12)
        self.assertAlmostEqual(var, 0.09, places=6)
        _, var_exact = watterson.limit_coeffs_w(0.0, MU, "exact")
        self.assertAlmostEqual(var_exact, 0.18, places=6)

    def test_interior_point(self):
        drift, var = watterson.limit_coeffs_w(0.5, MU)
        self.assertAlmostEqual(drift, -0.008768, delta=1e-6)
        self.assertAlmostEqual(var, 0.245509, delta=1e-6)
        drift_exact, var_exact = watterson.limit_coeffs_w(0.5, MU, "exact")
        self.assertEqual(drift, drift_exact)
        self.assertAlmostEqual(var_exact, 0.263695, delta=1e-6)

    def test_drift_is_odd(self):
        z = np.array([0.2, 0.6])
        d_pos, v_pos = watterson.limit_coeffs_w(z, MU)
        d_neg, v_neg = watterson.limit_coeffs_w(-z, MU)
        np.testing.assert_allclose(d_pos, -d_neg, rtol=1e-9)
        np.testing.assert_allclose(v_pos, v_neg, rtol=1e-9)

    def test_out_of_range(self):
        with self.assertRaises(ParameterError):
            watterson.limit_coeffs_w(0.99, MU)
        with self.assertRaises(ParameterError):
            watterson.limit_coeffs_w(0.0, MU, "other")

    def test_projection_difference(self):
        point = watterson.project_w(WState(0.9, 0.5), MU)
        self.assertAlmostEqual(watterson.projection_difference(0.9, 0.5, MU), point.z)

    def test_coefficients_against_ito_formula(self):
        for z in (0.0, 0.3, 0.7):
            point = watterson.curve_point_of_z(z, MU)
            x, y = point.x_star, point.y_star
            drift_ito, var_ito = _ito_coefficients(x, y)
            drift, published = watterson.limit_coeffs_w(z, MU)
            _, exact = watterson.limit_coeffs_w(z, MU, "exact")
            self.assertAlmostEqual(drift, drift_ito, delta=1e-6 + 1e-4 * abs(drift_ito), msg=f"z={z}")
            self.assertAlmostEqual(exact, var_ito, delta=1e-5 * var_ito, msg=f"z={z}")
            # The two-term variance omits the covariance of x* and y*.
            self.assertLess(published, exact, msg=f"z={z}")
        _, published = watterson.limit_coeffs_w(0.0, MU)
        centre = watterson.curve_point_of_z(0.0, MU)
        self.assertAlmostEqual(published / _ito_coefficients(centre.x_star, centre.y_star)[1], 0.5, places=4)


if __name__ == "__main__":
    unittest.main()
