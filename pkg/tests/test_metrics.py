import unittest
import sys, os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np

from hypothesis import given, settings, strategies as st

from phylodyn_ps import LogPopTrajectory, PosteriorSummary, StudyResult, build_grid
from phylodyn_ps import interval_stats, pointwise_stats, emrw, pointwise_emrw, seasonal_overlay
from phylodyn_ps.metrics import evaluation_grid, format_interval, study_table, pointwise_table, STUDY_COLUMNS, POINTWISE_COLUMNS

GRID = build_grid(0, 1, 4)
EVAL = evaluation_grid(0, 1, 10)

def truth(values) -> LogPopTrajectory:
    return LogPopTrajectory(GRID, np.log(np.broadcast_to(np.asarray(values, dtype = float), (GRID.B,))))

def summary(median, lower, upper, grid = GRID) -> PosteriorSummary:
    shape = (grid.B,)
    return PosteriorSummary(
        grid,
        np.broadcast_to(np.asarray(median, dtype = float), shape).copy(),
        np.broadcast_to(np.asarray(lower, dtype = float), shape).copy(),
        np.broadcast_to(np.asarray(upper, dtype = float), shape).copy(),
    )

positive_cells = st.lists(st.floats(min_value = 0.1, max_value = 10), min_size = 4, max_size = 4)

class IntervalStats_TestCase(unittest.TestCase):

    def test_constant_functions(self) -> None:
        res = StudyResult([truth(1.0)], [summary(1.5, 1.0, 3.0)], EVAL)
        stats = interval_stats(res, 0, 1)
        self.assertAlmostEqual(stats.mrd, 0.5)
        self.assertAlmostEqual(stats.mrw, 2.0)
        self.assertEqual(stats.me, 1.0)

    def test_perfect_estimate(self) -> None:
        true_traj = truth([1.0, 2.0, 4.0, 3.0])
        res = StudyResult([true_traj], [summary(true_traj.ne, true_traj.ne, true_traj.ne)], EVAL)
        self.assertEqual(tuple(interval_stats(res, 0, 1)), (0.0, 0.0, 1.0))

    def test_envelope_counts_points(self) -> None:
        # truth leaves the interval on the last cell only: points 0.8, 0.9 and 1.0
        res = StudyResult([truth([1.0, 1.0, 1.0, 5.0])], [summary(1.0, 0.5, 2.0)], EVAL)
        self.assertAlmostEqual(interval_stats(res, 0, 1).me, 8 / 11)

    def test_step_function_integral(self) -> None:
        res = StudyResult([truth(1.0)], [summary([1.0, 1.0, 3.0, 3.0], 0.5, 4.0)], evaluation_grid(0, 1, 4))
        # points 0, .25, .5, .75, 1 carry errors 0, 0, 2, 2, 2
        self.assertAlmostEqual(interval_stats(res, 0, 1).mrd, 1.25)

    def test_replicate_average(self) -> None:
        res = StudyResult([truth(1.0), truth(2.0)], [summary(1.5, 1.0, 3.0), summary(2.0, 1.0, 2.0)], EVAL)
        stats = interval_stats(res, 0, 1)
        self.assertAlmostEqual(stats.mrd, 0.25)
        self.assertAlmostEqual(stats.mrw, 1.25)

    def test_errors(self) -> None:
        res = StudyResult([truth(1.0)], [summary(1.0, 0.5, 2.0)], EVAL)
        with self.assertRaises(ValueError):
            interval_stats(res, 0.5, 0.5)
        with self.assertRaises(ValueError):
            interval_stats(res, 0.51, 0.59)
        with self.assertRaises(ValueError):
            interval_stats(StudyResult([], [], EVAL), 0, 1)
        with self.assertRaises(ValueError):
            StudyResult([truth(1.0)], [], EVAL)

    @given(positive_cells, positive_cells, st.floats(min_value = 0.01, max_value = 100))
    @settings(max_examples = 60, deadline = None)
    def test_scale_invariance(self, true_values, estimates, scale) -> None:
        true_values, estimates = np.array(true_values), np.array(estimates)
        res = StudyResult([truth(true_values)], [summary(estimates, 0.5 * estimates, 2 * estimates)], EVAL)
        scaled = StudyResult([truth(scale * true_values)], [summary(scale * estimates, 0.5 * scale * estimates, 2 * scale * estimates)], EVAL)
        for a, b in ((0, 1), (0.2, 0.7)):
            expected, actual = interval_stats(res, a, b), interval_stats(scaled, a, b)
            self.assertAlmostEqual(actual.mrd, expected.mrd, delta = 1e-9 * max(1.0, expected.mrd))
            self.assertAlmostEqual(actual.mrw, expected.mrw, delta = 1e-9 * max(1.0, expected.mrw))
            self.assertGreaterEqual(actual.mrd, 0)
            self.assertTrue(0 <= actual.me <= 1)

    @given(positive_cells, positive_cells, st.integers(min_value = 1, max_value = 9))
    @settings(max_examples = 60, deadline = None)
    def test_interval_additivity(self, true_values, estimates, split) -> None:
        estimates = np.array(estimates)
        res = StudyResult([truth(true_values)], [summary(estimates, 0.5 * estimates, 2 * estimates)], EVAL)
        c = EVAL[split]
        whole = interval_stats(res, 0, 1)
        left, right = interval_stats(res, 0, c), interval_stats(res, c, 1)
        self.assertAlmostEqual(whole.mrd, c * left.mrd + (1 - c) * right.mrd, delta = 1e-10)
        self.assertAlmostEqual(whole.mrw, c * left.mrw + (1 - c) * right.mrw, delta = 1e-10)

class PointwiseStats_TestCase(unittest.TestCase):

    def test_symmetric_errors_cancel(self) -> None:
        res = StudyResult([truth(2.0), truth(2.0)], [summary(1.0, 0.5, 2.0), summary(3.0, 2.5, 4.0)], EVAL)
        stats = pointwise_stats(res)
        np.testing.assert_allclose(stats.mpmedian, 2.0)
        np.testing.assert_allclose(stats.mre, 0.0, atol = 1e-12)
        np.testing.assert_allclose(stats.mrw, 0.75)
        np.testing.assert_array_equal(stats.time, EVAL)

    def test_exact_median(self) -> None:
        true_traj = truth([1.0, 2.0, 4.0, 3.0])
        stats = pointwise_stats(StudyResult([true_traj], [summary(true_traj.ne, 0.5, 8.0)], EVAL))
        np.testing.assert_allclose(stats.mre, 0.0)
        self.assertEqual(list(stats.to_frame().columns), ["time", "mpmedian", "mre", "mrw"])

class EMRW_TestCase(unittest.TestCase):

    def test_constant(self) -> None:
        self.assertAlmostEqual(emrw([summary(2.0, 1.0, 3.0)], 0, 1), 1.0)

    def test_zero_width(self) -> None:
        self.assertEqual(emrw([summary(2.0, 2.0, 2.0)], 0, 1), 0.0)

    def test_mean_over_datasets(self) -> None:
        value = emrw([summary(2.0, 1.0, 3.0), summary(1.0, 0.5, 1.5)], 0, 1, eval_grid = EVAL)
        self.assertAlmostEqual(value, 1.0)
        self.assertAlmostEqual(emrw([summary(2.0, 1.0, 3.0), summary(1.0, 0.0, 3.0)], 0, 1), 2.0)

    def test_pointwise(self) -> None:
        df = pointwise_emrw([summary([2.0, 2.0, 1.0, 1.0], [1.0, 1.0, 0.5, 0.5], [3.0, 3.0, 3.5, 3.5])])
        np.testing.assert_allclose(df["time"], GRID.edges)
        np.testing.assert_allclose(df["emrw"], [1.0, 1.0, 3.0, 3.0, 3.0])

    def test_errors(self) -> None:
        with self.assertRaises(ValueError):
            emrw([], 0, 1)
        with self.assertRaises(ValueError):
            emrw([summary(2.0, 1.0, 3.0)], 1, 0)

class SeasonalOverlay_TestCase(unittest.TestCase):

    def test_two_seasons_fold(self) -> None:
        grid = build_grid(0, 24, 24)
        phase_values = np.arange(1.0, 13.0)
        median = np.concatenate([phase_values, phase_values + 2])
        df = seasonal_overlay(summary(median, 0.5 * median, 2 * median, grid = grid), period = 12)
        self.assertEqual(len(df), 12)
        np.testing.assert_array_equal(df["count"], 2)
        np.testing.assert_allclose(df["phase"], np.arange(12) + 0.5)
        np.testing.assert_allclose(df["median"], phase_values + 1)

    def test_invalid(self) -> None:
        with self.assertRaises(ValueError):
            seasonal_overlay(summary(1.0, 1.0, 1.0), period = 0)

class Tables_TestCase(unittest.TestCase):

    def test_study_table(self) -> None:
        res = StudyResult([truth(1.0)], [summary(1.5, 1.0, 3.0)], EVAL)
        df = study_table({("uniform", "bnpr"): res, ("uniform", "bnpr-ps"): res}, [(0, 0.5), (0.5, 1)])
        self.assertEqual(list(df.columns), list(STUDY_COLUMNS))
        self.assertEqual(list(df["interval"]), ["(0,0.5)", "(0.5,1)"] * 2)
        np.testing.assert_allclose(df["MRD"], 0.5)

    def test_pointwise_table(self) -> None:
        res = StudyResult([truth(1.0)], [summary(1.5, 1.0, 3.0)], EVAL)
        df = pointwise_table({("proportional", "bnpr"): res})
        self.assertEqual(list(df.columns), list(POINTWISE_COLUMNS))
        self.assertEqual(len(df), len(EVAL))
        self.assertTrue(pointwise_table({}).empty)

    def test_format_interval(self) -> None:
        self.assertEqual(format_interval((0.0, 6.0)), "(0,6)")
        self.assertEqual(format_interval((6, 48)), "(6,48)")

    def test_evaluation_grid(self) -> None:
        np.testing.assert_allclose(evaluation_grid(0, 48, 300)[[0, -1]], [0, 48])
        self.assertEqual(len(evaluation_grid(0, 48, 300)), 301)
        with self.assertRaises(ValueError):
            evaluation_grid(0, 48, 0)

if __name__ == '__main__':
    unittest.main()
