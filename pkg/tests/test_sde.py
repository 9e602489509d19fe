"""Tests for the Euler-Maruyama and RK4 integrators."""
import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from genedup import diffusion1d, sde, subfunc, watterson
from genedup.errors import ParameterError
from genedup.outcomes import Outcome
from genedup.schemas import SdeRun, SubfuncParams, WattersonParams

MU = 1e-4
SLOW = bool(os.environ.get("GENEDUP_SLOW_TESTS"))


def _watterson_run(**overrides):
    settings = dict(model="watterson", mu=MU, n_pop=100, dt=1e-4, horizon=0.05, seed=7, paths=3, start=[0.5, 0.5])
    settings.update(overrides)
    return SdeRun(**settings)


class TestNoise(unittest.TestCase):
    def _loading(self, state):
        states = np.tile(state, (8, 1))
        return sde.noise_increment("subfunc", states, np.eye(8)).T

    def test_multinomial_covariance(self):
        state = np.array([0.4, 0.2, 0.1, 0.3, 0.05, 0.25])
        loading = self._loading(state)
        cov = loading @ loading.T
        expected = np.zeros((6, 6))
        for locus in (slice(0, 3), slice(3, 6)):
            p = state[locus]
            expected[locus, locus] = np.diag(p) - np.outer(p, p)
        np.testing.assert_allclose(cov, expected, atol=1e-15)

    def test_loci_are_unlinked(self):
        loading = self._loading(np.array([0.4, 0.2, 0.1, 0.3, 0.05, 0.25]))
        np.testing.assert_array_equal(loading[:3, 4:], 0.0)
        np.testing.assert_array_equal(loading[3:, :4], 0.0)

    def test_watterson_noise(self):
        states = np.array([[0.5, 0.1], [1.0, 0.0]])
        z = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = sde.noise_increment("watterson", states, z)
        np.testing.assert_allclose(out, [[0.5, 0.6], [0.0, 0.0]])


class TestStateHandling(unittest.TestCase):
    def test_clamp(self):
        states = np.array([[0.5, 0.2, 0.1, 0.7, 0.2, 0.3], [0.2, 0.2, 0.2, -0.01, 0.5, 0.5]])
        fixed, over = sde.clamp_states("subfunc", states)
        self.assertAlmostEqual(fixed[0, 3:].sum(), 1.0)
        np.testing.assert_allclose(fixed[0, 3:] / fixed[0, 3], [1.0, 2.0 / 7.0, 3.0 / 7.0])
        np.testing.assert_array_equal(fixed[1], [0.2, 0.2, 0.2, 0.0, 0.5, 0.5])
        self.assertAlmostEqual(over[0], 0.2)
        self.assertAlmostEqual(over[1], 0.01)

    def test_classify(self):
        n = 50
        states = np.array(
            [
                [0.0, 0.0, 0.0, 0.5, 0.2, 0.2],
                [0.5, 0.2, 0.2, 0.0, 0.0, 0.005],
                [0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                [0.0, 0.0, 1.0, 0.0, 1.0, 0.0],
                [0.3, 0.3, 0.3, 0.3, 0.3, 0.3],
            ]
        )
        np.testing.assert_array_equal(sde.classify_states("subfunc", states, n), [0, 1, 2, 2, -1])
        pairs = np.array([[1.0, 0.2], [0.3, 0.999], [0.5, 0.5]])
        np.testing.assert_array_equal(sde.classify_states("watterson", pairs, 100), [0, 1, -1])

    def test_curve_distance(self):
        p = SubfuncParams(b=1e-3)
        e = subfunc.symmetric_point(p)
        states = np.array([e.as_state().as_array(), [0.0, 0.5, 0.5, 0.5, 0.2, 0.2]])
        dist = sde.curve_distance(p, states)
        self.assertLess(dist[0], 1e-10)
        self.assertTrue(np.isnan(dist[1]))
        pair = np.array([[0.1, 0.1], [0.5, 0.5]])
        np.testing.assert_allclose(sde.curve_distance(WattersonParams(mu=MU), pair), [0.0, 0.0625 - MU], atol=1e-18)


class TestOde(unittest.TestCase):
    def test_converges_to_projection(self):
        traj = sde.integrate_ode(WattersonParams(mu=MU), [0.9, 0.5], horizon=2000.0, dt=0.5)
        target = watterson.project_w(watterson.WState(0.9, 0.5), MU)
        self.assertLess(abs(traj.final[0] - target.x_star), 1e-6)
        self.assertLess(abs(traj.final[1] - target.y_star), 1e-6)
        self.assertEqual(traj.states.shape, (4001, 2))

    def test_flow_keeps_line_ratio(self):
        traj = sde.integrate_ode(WattersonParams(mu=MU), [0.3, 0.6], horizon=50.0, dt=0.1)
        ratios = (1.0 - traj.states[:, 0]) / (1.0 - traj.states[:, 1])
        np.testing.assert_allclose(ratios, 0.7 / 0.4, rtol=1e-10)

    def test_subfunc_keeps_full_copy_ratio(self):
        p = SubfuncParams(b=1e-3)
        e = subfunc.symmetric_point(p)
        start = [e.x3 * 0.9, e.x + 0.01, e.x, e.y3 * 0.8, e.y, e.y + 0.01]
        traj = sde.integrate_ode(p, start, horizon=50.0, dt=0.1)
        ratios = traj.states[:, 3] / traj.states[:, 0]
        np.testing.assert_allclose(ratios, ratios[0], rtol=1e-8)

    def test_invalid_arguments(self):
        with self.assertRaises(ParameterError):
            sde.integrate_ode(WattersonParams(mu=MU), [0.3], horizon=1.0)
        with self.assertRaises(ParameterError):
            sde.integrate_ode(WattersonParams(mu=MU), [0.3, 0.3], horizon=-1.0)


class TestEulerMaruyama(unittest.TestCase):
    def test_deterministic_for_seed(self):
        a = sde.integrate_sde(_watterson_run())
        b = sde.integrate_sde(_watterson_run())
        np.testing.assert_array_equal(a.paths, b.paths)
        c = sde.integrate_sde(_watterson_run(), run_index=1)
        self.assertFalse(np.array_equal(a.paths, c.paths))

    def test_path_independent_of_batch_size(self):
        batch = sde.integrate_sde(_watterson_run(paths=3))
        alone = sde.integrate_sde(_watterson_run(paths=1))
        np.testing.assert_array_equal(batch.paths[0], alone.paths[0])

    def test_noise_free_run_follows_ode(self):
        result = sde.integrate_sde(_watterson_run(paths=1, noise_scale=0.0))
        reference = sde.integrate_ode(WattersonParams(mu=MU), [0.5, 0.5], 0.05, 1e-4, speed=200.0)
        self.assertLess(np.abs(result.paths[0, -1] - reference.final).max(), 5e-3)
        self.assertEqual(result.paths.shape, (1, 501, 2))

    def test_record_every(self):
        result = sde.integrate_sde(_watterson_run(record_every=100))
        np.testing.assert_allclose(result.times, [0.0, 0.01, 0.02, 0.03, 0.04, 0.05])
        short = sde.integrate_sde(_watterson_run(), keep_paths=False)
        self.assertEqual(short.paths.shape, (3, 2, 2))

    def test_driftless_increments_are_centred(self):
        run = _watterson_run(n_pop=1000, dt=1e-5, horizon=0.1, paths=1, drift_scale=0.0)
        result = sde.integrate_sde(run)
        steps = np.diff(result.paths[0], axis=0)
        for k in range(2):
            se = steps[:, k].std(ddof=1) / np.sqrt(len(steps))
            self.assertLess(abs(steps[:, k].mean()), 4.0 * se)

    def test_stats_per_path(self):
        result = sde.integrate_sde(_watterson_run())
        self.assertEqual(len(result.stats), 3)
        for stat in result.stats:
            self.assertIsNone(stat.error)
            self.assertIs(stat.outcome, Outcome.CENSORED)
            self.assertFalse(stat.exited)
        self.assertGreaterEqual(result.containment_fraction, 0.0)

    def test_step_guard(self):
        with self.assertRaises(ValueError):
            _watterson_run(n_pop=10**6, dt=1e-3)

    def test_subfunc_paths_stay_admissible(self):
        p = SubfuncParams(b=1e-3)
        e = subfunc.symmetric_point(p)
        run = SdeRun(
            model="subfunc",
            b=p.b,
            n_pop=200,
            dt=1e-5,
            horizon=0.01,
            seed=3,
            paths=4,
            start=list(e.as_state().as_array()),
        )
        result = sde.integrate_sde(run)
        self.assertTrue(np.all(result.paths >= 0.0))
        self.assertTrue(np.all(result.paths[..., :3].sum(axis=-1) <= 1.0 + 1e-12))
        self.assertTrue(np.all(result.paths[..., 3:].sum(axis=-1) <= 1.0 + 1e-12))


class TestExperiments(unittest.TestCase):
    def test_theorem1_noise_free(self):
        rows = sde.theorem1_experiment([1000], [0.5, 0.5], MU, paths=2, n_steps=1000, seed=1, noise_scale=0.0)
        self.assertEqual(len(rows), 1)
        self.assertLess(rows[0].estimate, 1e-5)
        self.assertAlmostEqual(rows[0].horizon, np.log(1000) / 1000)

    def test_theorem1_start_must_be_interior(self):
        with self.assertRaises(ParameterError):
            sde.theorem1_experiment([1000], [0.0, 0.5], MU)

    @unittest.skipUnless(SLOW, "set GENEDUP_SLOW_TESTS=1")
    def test_theorem1_gap_shrinks_with_population(self):
        rows = sde.theorem1_experiment([1000, 10000, 100000], [0.5, 0.5], MU, paths=200, seed=3)
        estimates = [r.estimate for r in rows]
        self.assertGreater(estimates[0], estimates[1])
        self.assertGreater(estimates[1], estimates[2])
        self.assertLessEqual(rows[-1].estimate, rows[-1].bound)

    def test_exit_time_of_brownian_motion(self):
        est = sde.mc_exit_time_1d(diffusion1d.constant_diffusion(1.0), 0.0, paths=2000, dt=1e-4, seed=11)
        self.assertLessEqual(est.censored, 2)
        self.assertLess(abs(est.mean - 1.0), 3.0 / 1.96 * est.half_width)

    def test_exit_time_arguments(self):
        d = diffusion1d.constant_diffusion(1.0)
        with self.assertRaises(ParameterError):
            sde.mc_exit_time_1d(d, 1.0, paths=10, dt=1e-3, seed=0)
        with self.assertRaises(ParameterError):
            sde.mc_exit_time_1d(d, 0.0, paths=10, dt=1e-3, seed=0, time_cap=2.0)

    @unittest.skipUnless(SLOW, "set GENEDUP_SLOW_TESTS=1")
    def test_containment_improves_with_population(self):
        rows = sde.containment_experiment([1000, 100000], MU, delta=0.3, horizon=1.0, paths=100, seed=5)
        self.assertGreaterEqual(rows[1].fraction, rows[0].fraction)


if __name__ == "__main__":
    unittest.main()
