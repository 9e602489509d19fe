"""Tests for the subfunctionalization curve of equilibria and its stability."""
import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from genedup import subfunc
from genedup.errors import DomainError, ParameterError
from genedup.numerics import central_diff, central_diff2, fd_jacobian
from genedup.schemas import SubfuncParams
from genedup.subfunc import SState

RATES = (1e-4, 1e-3, 1e-2)
# field_array order (x3, x2, x1, y3, y2, y1) -> Jacobian order (x3, y3, x2, x1, y2, y1)
JAC_ORDER = [0, 3, 1, 2, 4, 5]


def _restricted_field(v, b):
    """Field on (x3, y3, x, y) with x2 = x1 = x and y2 = y1 = y."""
    x3, y3, x, y = v
    full = subfunc.field_array(np.array([x3, x, x, y3, y, y]), b)
    return np.array([full[0], full[3], full[1], full[4]])


def _ito_coefficients(x3, y3, p):
    """Drift and variance of x3* - y3* from finite differences of the projection.

    Only x3 and y3 enter the projection; their noise is x3(1 - x3) and
    y3(1 - y3) with no covariance across loci.
    """
    def h(u, v):
        return subfunc.project_s(SState(u, 0.0, 0.0, v, 0.0, 0.0), p).z

    hx = central_diff(lambda u: h(u, y3), x3, 1e-5 * x3)
    hy = central_diff(lambda v: h(x3, v), y3, 1e-5 * y3)
    hxx = central_diff2(lambda u: h(u, y3), x3, 1e-3 * x3)
    hyy = central_diff2(lambda v: h(x3, v), y3, 1e-3 * y3)
    ax, ay = x3 * (1.0 - x3), y3 * (1.0 - y3)
    return 0.5 * (ax * hxx + ay * hyy), ax * hx * hx + ay * hy * hy


class TestCurve(unittest.TestCase):
    def test_end_values(self):
        for b in RATES:
            p = SubfuncParams(b=b)
            self.assertAlmostEqual(subfunc.curve_y3_of_x3(0.0, p), p.alpha, places=14)
            self.assertAlmostEqual(subfunc.curve_y3_of_x3(p.alpha, p), 0.0, places=12)

    def test_residuals_along_curve(self):
        for b in RATES:
            worst = max(
                float(np.abs(subfunc.equilibrium_residuals(e)).max())
                for e in subfunc.equilibrium_curve(b).points(200)
            )
            self.assertLessEqual(worst, 1e-10, msg=f"b={b}")

    def test_curve_points_are_fixed_points(self):
        b = 1e-3
        for e in subfunc.equilibrium_curve(b).points(30):
            rates = subfunc.field_array(e.as_state().as_array(), b)
            self.assertLess(np.abs(rates).max(), 1e-9)

    def test_gamma_identity(self):
        for e in subfunc.equilibrium_curve(1e-3).points(15):
            self.assertAlmostEqual(e.gamma, -2.0 * e.x * e.y, places=10)

    def test_x3_outside_range(self):
        p = SubfuncParams(b=1e-3)
        with self.assertRaises(DomainError):
            subfunc.curve_y3_of_x3(p.alpha + 1e-6, p)
        with self.assertRaises(DomainError):
            subfunc.curve_y3_of_x3(-0.01, p)

    def test_lookup_round_trips(self):
        curve = subfunc.equilibrium_curve(1e-3)
        z = np.linspace(-0.9, 0.9, 13)
        x3 = curve.x3_of_z(z)
        np.testing.assert_allclose(x3 - curve.y3(x3), z, atol=1e-12)
        r = np.array([0.1, 0.7, 1.0, 3.0])
        x3 = curve.x3_of_ratio(r)
        np.testing.assert_allclose(curve.y3(x3) / x3, r, rtol=1e-10)

    def test_slope_matches_finite_difference(self):
        curve = subfunc.equilibrium_curve(1e-3)
        for t in (0.1, 0.5, 0.9):
            fd = central_diff(lambda v: float(curve.y3(v)), t, 1e-6)
            self.assertAlmostEqual(float(curve.slope(t)), fd, places=6)

    def test_mutation_rate_range(self):
        with self.assertRaises(ParameterError):
            subfunc.EquilibriumCurve(0.4)


class TestSymmetricPoint(unittest.TestCase):
    def test_known_value(self):
        sym = subfunc.symmetric_point(SubfuncParams(b=1e-3))
        self.assertAlmostEqual(sym.x3, sym.y3, places=12)
        self.assertAlmostEqual(sym.x3, 0.935801, delta=1e-6)
        self.assertAlmostEqual(sym.x, sym.y, places=12)
        self.assertAlmostEqual(subfunc.symmetric_point_asymptotics(1e-3).x3, 0.934915, delta=1e-6)

    def test_leading_order_agreement(self):
        for b in RATES:
            sym = subfunc.symmetric_point(SubfuncParams(b=b))
            self.assertLessEqual(abs(sym.x3 - subfunc.symmetric_point_asymptotics(b).x3), 10.0 * b)

    def test_small_rate_asymptotics(self):
        b = 1e-4
        sym = subfunc.symmetric_point(SubfuncParams(b=b))
        pred = subfunc.symmetric_point_asymptotics(b)
        gap = sym.y3 * (1.0 - sym.x3) - sym.x
        self.assertLess(abs(gap / pred.gap - 1.0), 0.05)
        self.assertLess(abs(sym.x / pred.x - 1.0), 0.02)


class TestProjection(unittest.TestCase):
    def setUp(self):
        self.p = SubfuncParams(b=1e-3)

    def test_ratio_preserved(self):
        s = SState(0.5, 0.1, 0.1, 0.3, 0.1, 0.1)
        e = subfunc.project_s(s, self.p)
        self.assertAlmostEqual(e.y3 / e.x3, 0.6, places=12)
        self.assertLess(np.abs(subfunc.equilibrium_residuals(e)).max(), 1e-10)

    def test_idempotent(self):
        for e in subfunc.equilibrium_curve(self.p.b).points(9):
            again = subfunc.project_s(e.as_state(), self.p)
            self.assertAlmostEqual(again.x3, e.x3, places=10)
            self.assertAlmostEqual(again.y3, e.y3, places=10)

    def test_requires_both_full_copies(self):
        with self.assertRaises(ParameterError):
            subfunc.project_s(SState(0.0, 0.3, 0.3, 0.5, 0.1, 0.1), self.p)

    def test_derivatives_match_finite_differences(self):
        curve = subfunc.equilibrium_curve(self.p.b)

        def u_of(r):
            return float(curve.x3_of_ratio(r))

        for r in (0.2, 0.5, 1.0, 2.0, 5.0):
            u, du, d2u = subfunc.projection_derivs(r, self.p)
            self.assertAlmostEqual(u, u_of(r), places=12)
            fd1 = central_diff(u_of, r, 1e-5 * r)
            fd2 = central_diff2(u_of, r, 1e-3 * r)
            self.assertLess(abs(du - fd1) / abs(du), 1e-6)
            self.assertLess(abs(d2u - fd2) / abs(d2u), 1e-4)

    def test_ratio_lookup_matches_bracketed_projection(self):
        for b in RATES:
            p = SubfuncParams(b=b)
            curve = subfunc.equilibrium_curve(b)
            for r in (0.2, 1.0, 5.0):
                bracketed = subfunc.project_s(SState(0.1, 0.0, 0.0, 0.1 * r, 0.0, 0.0), p).x3
                self.assertAlmostEqual(float(curve.x3_of_ratio(r)), bracketed, delta=2e-14, msg=f"b={b} r={r}")


class TestField(unittest.TestCase):
    def test_gene_swap_symmetry(self):
        s = SState(0.4, 0.2, 0.1, 0.3, 0.05, 0.25)
        swapped = subfunc.swap_genes(s)
        self.assertEqual(swapped, SState(0.3, 0.25, 0.05, 0.4, 0.1, 0.2))
        self.assertEqual(SState.from_array(s.as_array()), s)
        f = subfunc.field_array(s.as_array(), 0.01)
        f_swapped = subfunc.field_array(swapped.as_array(), 0.01)
        expected = np.array([f[3], f[5], f[4], f[0], f[2], f[1]])
        np.testing.assert_allclose(f_swapped, expected, rtol=1e-13, atol=1e-15)

    def test_mean_fitness(self):
        s = SState(0.4, 0.2, 0.1, 0.3, 0.05, 0.25)
        self.assertAlmostEqual(subfunc.mean_fitness(s), 0.4 + 0.3 - 0.12 + 0.1 * 0.05 + 0.2 * 0.25)
        self.assertAlmostEqual(float(subfunc.fitness_array(s.as_array())), subfunc.mean_fitness(s))

    def test_ode_field_matches_array(self):
        s = SState(0.4, 0.2, 0.1, 0.3, 0.05, 0.25)
        p = SubfuncParams(b=0.01)
        np.testing.assert_allclose(subfunc.ode_field_s(s, p), subfunc.field_array(s.as_array(), p.b))

    def test_invalid_state(self):
        with self.assertRaises(ParameterError):
            SState(0.6, 0.3, 0.2, 0.1, 0.1, 0.1)

    def test_subfunctionalized_equilibrium(self):
        p = SubfuncParams(b=1e-3)
        q = 0.5 * (1.0 + np.sqrt(1.0 - 8.0 * p.b))
        for mirror in (False, True):
            s = subfunc.subfunctionalized_equilibrium(p, mirror=mirror)
            self.assertLessEqual(np.abs(subfunc.field_array(s.as_array(), p.b)).max(), 1e-12)
        s = subfunc.subfunctionalized_equilibrium(p)
        self.assertEqual((s.x2, s.y1), (q, q))
        with self.assertRaises(DomainError):
            subfunc.subfunctionalized_equilibrium(SubfuncParams(b=0.2))


class TestLinearization(unittest.TestCase):
    def test_full_jacobian_matches_finite_differences(self):
        p = SubfuncParams(b=0.01)
        s = SState(0.4, 0.2, 0.1, 0.3, 0.05, 0.25)
        fd = fd_jacobian(lambda v: subfunc.field_array(v, p.b), s.as_array())
        reordered = fd[np.ix_(JAC_ORDER, JAC_ORDER)]
        np.testing.assert_allclose(subfunc.field_jacobian(s, p), reordered, atol=1e-8)

    def test_jacobian_at_curve_point(self):
        p = SubfuncParams(b=1e-3)
        e = subfunc.symmetric_point(p)
        np.testing.assert_array_equal(subfunc.jacobian6(e, p), subfunc.field_jacobian(e.as_state(), p))
        self.assertEqual(subfunc.jacobian6(e, p).shape, (6, 6))

    def test_symmetric_block_matches_finite_differences(self):
        p = SubfuncParams(b=1e-3)
        for e in subfunc.equilibrium_curve(p.b).points(7):
            fd = fd_jacobian(lambda v: _restricted_field(v, p.b), np.array([e.x3, e.y3, e.x, e.y]))
            np.testing.assert_allclose(subfunc.symmetric_block(e, p), fd, atol=1e-6)

    def test_basis_change_reduces_block(self):
        p = SubfuncParams(b=1e-3)
        for e in subfunc.equilibrium_curve(p.b).points(20):
            v, v_inv = subfunc.basis_change(e)
            np.testing.assert_allclose(v_inv @ v, np.eye(4), atol=1e-12)
            reduced = v_inv @ subfunc.symmetric_block(e, p) @ v
            scale = np.abs(reduced).max()
            np.testing.assert_allclose(reduced[0], 0.0, atol=1e-10 * scale)
            _, m = subfunc.reduced_matrices(e, p)
            np.testing.assert_allclose(reduced[1:, 1:], m, atol=1e-10 * scale)

    def test_spectrum_splits_into_reduced_blocks(self):
        p = SubfuncParams(b=1e-3)
        for e in subfunc.equilibrium_curve(p.b).points(9):
            full = list(np.linalg.eigvals(subfunc.jacobian6(e, p)))
            m2, m = subfunc.reduced_matrices(e, p)
            parts = list(np.linalg.eigvals(m2)) + list(np.linalg.eigvals(m)) + [0.0]
            scale = np.abs(subfunc.jacobian6(e, p)).max()
            self.assertEqual(len(full), len(parts))
            for lam in parts:
                gaps = [abs(lam - mu) for mu in full]
                k = int(np.argmin(gaps))
                self.assertLess(gaps[k], 1e-7 * scale, msg=f"z={e.z} eigenvalue {lam}")
                full.pop(k)

    def test_stable_along_curve(self):
        for b in RATES:
            p = SubfuncParams(b=b)
            for e in subfunc.equilibrium_curve(b).points(40):
                rep = subfunc.routh_hurwitz(e, p)
                self.assertTrue(rep.stable, msg=f"b={b} z={e.z}")
                self.assertLess(rep.max_real, 0.0)

    def test_lemmas(self):
        report = subfunc.verify_lemmas(SubfuncParams(b=1e-3), 200)
        for name in ("lemma2", "det2", "lemma3", "trace"):
            self.assertTrue(report.check(name).holds, msg=name)
        self.assertFalse(report.check("a1_x3_ge_y3").holds)
        self.assertEqual(report.check("lemma2").points, 200)
        with self.assertRaises(KeyError):
            report.check("nope")


class TestLimitCoefficients(unittest.TestCase):
    def setUp(self):
        self.p = SubfuncParams(b=1e-3)

    def test_zero_drift_at_symmetric_point(self):
        drift, var = subfunc.limit_coeffs_s(0.0, self.p)
        self.assertLess(abs(drift), 1e-8)
        self.assertGreater(var, 0.0)

    def test_drift_is_odd(self):
        z = np.array([0.3, 0.7])
        d_pos, v_pos = subfunc.limit_coeffs_s(z, self.p)
        d_neg, v_neg = subfunc.limit_coeffs_s(-z, self.p)
        np.testing.assert_allclose(d_pos, -d_neg, rtol=1e-6)
        np.testing.assert_allclose(v_pos, v_neg, rtol=1e-6)

    def test_variance_modes_differ(self):
        _, published = subfunc.limit_coeffs_s(0.4, self.p)
        _, exact = subfunc.limit_coeffs_s(0.4, self.p, "exact")
        self.assertGreater(exact, 0.0)
        self.assertNotAlmostEqual(published, exact, places=6)

    def test_out_of_range(self):
        with self.assertRaises(ParameterError):
            subfunc.limit_coeffs_s(self.p.alpha, self.p)

    def test_coefficients_against_ito_formula(self):
        curve = subfunc.equilibrium_curve(self.p.b)
        for z in (0.0, 0.3, 0.7):
            x3 = float(curve.x3_of_z(z))
            y3 = float(curve.y3(x3))
            drift_ito, var_ito = _ito_coefficients(x3, y3, self.p)
            drift, _ = subfunc.limit_coeffs_s(z, self.p)
            _, exact = subfunc.limit_coeffs_s(z, self.p, "exact")
            self.assertAlmostEqual(drift, drift_ito, delta=1e-6 + 1e-4 * abs(drift_ito), msg=f"z={z}")
            self.assertAlmostEqual(exact, var_ito, delta=1e-5 * var_ito, msg=f"z={z}")
        _, published = subfunc.limit_coeffs_s(0.4, self.p)
        x3 = float(curve.x3_of_z(0.4))
        self.assertNotAlmostEqual(published, _ito_coefficients(x3, float(curve.y3(x3)), self.p)[1], places=4)


if __name__ == "__main__":
    unittest.main()
