import math
import unittest
from datetime import datetime, timezone

from halvingeta.halvingeta_common.models import ParameterError
from halvingeta.halvingeta_common.naive import (
    confidence_interval,
    naive_eta,
    naive_prediction,
    naive_stddev,
    naive_stddev_from_eta,
    naive_variance,
    normal_quantile,
)
from halvingeta.halvingeta_common.units import add_duration, format_duration

START = datetime(2016, 6, 2, 23, 50, tzinfo=timezone.utc)


def utc(*fields):
    return datetime(*fields, tzinfo=timezone.utc)


class NaiveMomentsTestCase(unittest.TestCase):
    def test_eta(self):
        self.assertEqual(naive_eta(5476), 54760)
        self.assertEqual(format_duration(naive_eta(5476)), "38day+40min")
        self.assertEqual(naive_eta(0), 0)
        self.assertEqual(naive_eta(1), 10)

    def test_stddev(self):
        self.assertEqual(naive_stddev(5476), 740.0)
        self.assertEqual(format_duration(naive_stddev(5476)), "12hr+20min")
        self.assertEqual(naive_stddev(0), 0.0)
        self.assertEqual(naive_stddev(100), 100.0)

    def test_stddev_from_eta(self):
        self.assertEqual(round(naive_stddev_from_eta(57600)), 759)
        self.assertEqual(naive_stddev_from_eta(0), 0.0)
        self.assertAlmostEqual(naive_stddev_from_eta(54760), 740.0, places=9)

    def test_stddev_from_eta_agrees_with_block_count(self):
        for blocks in (1, 2, 17, 144, 2016, 5476, 210000):
            self.assertAlmostEqual(
                naive_stddev_from_eta(naive_eta(blocks)) / naive_stddev(blocks), 1.0, places=9
            )

    def test_variance_is_additive(self):
        for blocks in (1, 10, 5476):
            self.assertAlmostEqual(naive_stddev(blocks) ** 2, blocks * naive_stddev(1) ** 2)
            self.assertEqual(naive_variance(blocks), 100 * blocks)

    def test_negative_inputs_are_rejected(self):
        with self.assertRaises(ParameterError):
            naive_eta(-1)
        with self.assertRaises(ParameterError):
            naive_stddev_from_eta(-5.0)


class ConfidenceIntervalTestCase(unittest.TestCase):
    def test_quantiles(self):
        self.assertAlmostEqual(normal_quantile(0.683), 1.0, delta=0.005)
        self.assertAlmostEqual(normal_quantile(0.955), 2.0, delta=0.005)

    def test_one_sigma_example(self):
        interval = confidence_interval(54760, 740, 0.683)
        self.assertAlmostEqual(interval.lower, 54020, delta=5)
        self.assertAlmostEqual(interval.upper, 55500, delta=5)
        self.assertEqual(add_duration(START, interval.lower), utc(2016, 7, 10, 12, 10))
        self.assertEqual(add_duration(START, interval.upper), utc(2016, 7, 11, 12, 50))

    def test_two_sigma_example(self):
        interval = confidence_interval(54760, 740, 0.955)
        lower = add_duration(START, interval.lower)
        upper = add_duration(START, interval.upper)
        self.assertLessEqual(abs((lower - utc(2016, 7, 9, 23, 50)).total_seconds()), 300)
        self.assertLessEqual(abs((upper - utc(2016, 7, 12, 1, 10)).total_seconds()), 300)

    def test_interval_is_symmetric(self):
        interval = confidence_interval(1000.0, 30.0, 0.9)
        self.assertAlmostEqual(1000.0 - interval.lower, interval.upper - 1000.0)

    def test_zero_spread(self):
        interval = confidence_interval(54760, 0, 0.955)
        self.assertEqual((interval.lower, interval.upper), (54760, 54760))

    def test_intervals_nest(self):
        levels = [0.1, 0.5, 0.683, 0.9, 0.955, 0.999]
        intervals = [confidence_interval(54760, 740, level) for level in levels]
        for narrow, wide in zip(intervals, intervals[1:]):
            self.assertLess(wide.lower, narrow.lower)
            self.assertGreater(wide.upper, narrow.upper)

    def test_invalid_levels(self):
        for level in (0.0, 1.0, -0.5, 1.5):
            with self.assertRaises(ParameterError):
                confidence_interval(100, 10, level)


class NaivePredictionTestCase(unittest.TestCase):
    def test_prediction(self):
        prediction = naive_prediction(5476)
        self.assertEqual(prediction.eta, 54760)
        self.assertEqual(prediction.stddev, 740.0)
        self.assertAlmostEqual(prediction.variance / prediction.stddev**2, 1.0, places=9)
        self.assertEqual([i.level for i in prediction.intervals], [0.683, 0.955])
        self.assertEqual(prediction.warnings, ())

    def test_small_block_counts_carry_a_warning(self):
        with self.assertLogs("halvingeta.halvingeta_common.naive", level="WARNING"):
            prediction = naive_prediction(10)
        self.assertEqual(len(prediction.warnings), 1)
        self.assertEqual(prediction.stddev, 10 * math.sqrt(10))


if __name__ == "__main__":
    unittest.main()
