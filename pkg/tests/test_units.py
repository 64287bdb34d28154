import unittest
from datetime import datetime, timezone

from halvingeta.halvingeta_common.units import (
    Unit,
    UnitsError,
    add_duration,
    format_duration,
    from_unit,
    isoformat_utc,
    parse_timestamp,
    parse_unit,
    to_unit,
)

START = datetime(2016, 6, 2, 23, 50, tzinfo=timezone.utc)


def utc(*fields):
    return datetime(*fields, tzinfo=timezone.utc)


class UnitConversionTestCase(unittest.TestCase):
    def test_conversion_table_constants(self):
        self.assertEqual(to_unit(57600, "day"), 40.0)
        self.assertEqual(to_unit(0, Unit.WEEK), 0.0)
        self.assertEqual(to_unit(10080, Unit.WEEK), 1.0)
        self.assertEqual(to_unit(43830, "month"), 1.0)
        self.assertEqual(to_unit(526000, "year"), 1.0)
        self.assertEqual(to_unit(60, "hours"), 1.0)

    def test_round_trip_for_every_unit(self):
        for unit in Unit:
            for value in (0.0, 1.0, 3.7, 12345.678):
                back = to_unit(from_unit(value, unit), unit)
                self.assertLessEqual(abs(back - value), 1e-9 * max(1.0, value))

    def test_unknown_unit_is_rejected(self):
        self.assertIs(parse_unit("weeks"), Unit.WEEK)
        with self.assertRaises(UnitsError):
            parse_unit("fortnight")


class CalendarTestCase(unittest.TestCase):
    def test_worked_example_eta(self):
        self.assertEqual(add_duration(START, 54760), utc(2016, 7, 11, 0, 30))

    def test_worked_example_interval_start(self):
        self.assertEqual(add_duration(START, 54760 - 740), utc(2016, 7, 10, 12, 10))

    def test_zero_duration_is_identity(self):
        self.assertEqual(add_duration(START, 0), START)

    def test_add_then_subtract_returns_original(self):
        later = add_duration(START, 12345.4)
        self.assertEqual(add_duration(later, -12345.4), START)

    def test_addition_is_associative_to_the_minute(self):
        for a, b in ((10.4, 20.4), (1000.0, -333.3), (54760, 8174.2)):
            stepwise = add_duration(add_duration(START, a), b)
            direct = add_duration(START, a + b)
            self.assertLessEqual(abs((stepwise - direct).total_seconds()), 60)

    def test_overflow_is_reported(self):
        with self.assertRaises(UnitsError):
            add_duration(utc(9999, 12, 31, 23, 0), 120)

    def test_parse_timestamp_forms(self):
        self.assertEqual(parse_timestamp("2016-06-02T23:50Z"), START)
        self.assertEqual(parse_timestamp("2016-06-02 23:50"), START)
        self.assertEqual(parse_timestamp("2016-06-03T01:50+02:00"), START)
        with self.assertRaises(UnitsError):
            parse_timestamp("next tuesday")

    def test_isoformat(self):
        self.assertEqual(isoformat_utc(START), "2016-06-02T23:50Z")


class FormatDurationTestCase(unittest.TestCase):
    def test_mixed_style(self):
        self.assertEqual(format_duration(54760), "38day+40min")
        self.assertEqual(format_duration(740), "12hr+20min")
        self.assertEqual(format_duration(759), "12hr+39min")
        self.assertEqual(format_duration(8160), "5day+16hr")
        self.assertEqual(format_duration(0), "0min")
        self.assertEqual(format_duration(-150), "-2hr+30min")


if __name__ == "__main__":
    unittest.main()
