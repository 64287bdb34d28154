import io
import json
import math
import os
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout
from datetime import datetime, timedelta, timezone

from halvingeta.halvingeta_cli.__main__ import main
from halvingeta.halvingeta_common.ingest import build_snapshot, write_snapshot_file
from halvingeta.halvingeta_common.models import HeaderRecord, OutputReport
from halvingeta.halvingeta_common.units import parse_timestamp


class CLITestCase(unittest.TestCase):
    def run_cli(self, *argv, environ=None):
        stdout, stderr = io.StringIO(), io.StringIO()
        with redirect_stdout(stdout), redirect_stderr(stderr):
            code = main(list(argv), environ={} if environ is None else environ)
        return code, stdout.getvalue(), stderr.getvalue()

    def run_json(self, *argv):
        code, out, err = self.run_cli(*argv, "--json")
        self.assertEqual(code, 0, err)
        return json.loads(out)

    def assertTimestampNear(self, text, expected, minutes):
        delta = abs((parse_timestamp(text) - parse_timestamp(expected)).total_seconds())
        self.assertLessEqual(delta, minutes * 60)


class PredictTestCase(CLITestCase):
    def test_naive_worked_example(self):
        report = self.run_json(
            "predict", "--blocks-remaining", "5476", "--model", "naive", "--now", "2016-06-02T23:50Z"
        )
        self.assertEqual(report["eta_minutes"], 54760)
        self.assertEqual(report["stddev_minutes"], 740)
        self.assertEqual(report["eta_timestamp"], "2016-07-11T00:30Z")

        one, two = report["intervals"]
        self.assertEqual(one["lower_timestamp"], "2016-07-10T12:10Z")
        self.assertEqual(one["upper_timestamp"], "2016-07-11T12:50Z")
        self.assertTimestampNear(two["lower_timestamp"], "2016-07-09T23:50Z", 5)
        self.assertTimestampNear(two["upper_timestamp"], "2016-07-12T01:10Z", 5)

    def test_far_horizon_variance_form(self):
        report = self.run_json("predict", "--height", "419328", "--variance", "simplified")
        self.assertEqual(report["position"], {"n": 1, "M": 672})
        self.assertAlmostEqual(report["stddev_minutes"], 702, delta=1)
        self.assertAlmostEqual(report["eta_minutes"], 6720 * 2016 / 2015)

    def test_full_variance_form(self):
        report = self.run_json("predict", "--height", "419328")
        self.assertEqual(report["model"], "retarget")
        self.assertAlmostEqual(report["stddev_minutes"], 299.6, delta=0.5)
        self.assertEqual(report["inputs_echo"]["covariance"], "derived")

    def test_covariance_aliases(self):
        derived = self.run_json("predict", "--height", "414524")
        printed = self.run_json("predict", "--height", "414524", "--covariance", "printed")
        alias = self.run_json("predict", "--height", "414524", "--covariance", "paper")
        self.assertEqual(alias["variance"], printed["variance"])
        self.assertEqual(alias["inputs_echo"]["covariance"], "printed")
        self.assertGreater(alias["variance"], derived["variance"])

    def test_current_interval_points_to_far_horizon_form(self):
        full = self.run_json("predict", "--height", "419328")
        self.assertTrue(any("--variance simplified" in w for w in full["warnings"]))
        simplified = self.run_json("predict", "--height", "419328", "--variance", "simplified")
        self.assertEqual(simplified["warnings"], [])
        far = self.run_json("predict", "--height", "414524")
        self.assertFalse(any("--variance simplified" in w for w in far["warnings"]))

        code, out, _ = self.run_cli("predict", "--height", "419328")
        self.assertEqual(code, 0)
        self.assertIn("--variance simplified", out)

    def test_levels(self):
        report = self.run_json(
            "predict", "--blocks-remaining", "5476", "--model", "naive", "--level", "0.9"
        )
        self.assertEqual([interval["level"] for interval in report["intervals"]], [0.9])
        self.assertIsNone(report["eta_timestamp"])

    def test_zero_blocks(self):
        report = self.run_json("predict", "--blocks-remaining", "0", "--now", "2016-07-09T16:46Z")
        self.assertEqual((report["eta_minutes"], report["stddev_minutes"]), (0, 0))
        self.assertEqual(report["eta_timestamp"], "2016-07-09T16:46Z")

    def test_profile(self):
        report = self.run_json("predict", "--height", "414524", "--profile", "4")
        sigmas = [row["stddev_minutes"] for row in report["profile"]]
        self.assertEqual(len(sigmas), 4)
        self.assertEqual(sigmas, sorted(sigmas))

    def test_snapshot(self):
        start = datetime(2016, 7, 4, 12, 0, tzinfo=timezone.utc)
        headers = [
            HeaderRecord(419319 + i, start + timedelta(minutes=10 * i), 1.0) for i in range(10)
        ]
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "snapshot.jsonl")
            write_snapshot_file(build_snapshot(headers), path)
            report = self.run_json("predict", "--snapshot", path, "--model", "naive")

        self.assertEqual(report["blocks_remaining"], 672)
        self.assertEqual(report["inputs_echo"]["tip_height"], 419328)
        self.assertEqual(report["eta_timestamp"], "2016-07-09T05:30Z")

    def test_human_output(self):
        code, out, _ = self.run_cli(
            "predict", "--blocks-remaining", "5476", "--model", "naive", "--now", "2016-06-02T23:50Z"
        )
        self.assertEqual(code, 0)
        self.assertIn("Estimated halving", out)
        self.assertIn("2016-07-11 00:30", out)
        self.assertIn("38day+40min", out)

    def test_json_round_trips_through_report(self):
        report = self.run_json("predict", "--height", "414524")
        self.assertEqual(OutputReport.from_mapping(report).to_mapping(), report)

    def test_conflicting_sources(self):
        code, _, err = self.run_cli("predict", "--height", "1", "--blocks-remaining", "2")
        self.assertEqual(code, 2)
        self.assertIn("not allowed with", err)

    def test_bad_level(self):
        code, _, _ = self.run_cli("predict", "--blocks-remaining", "10", "--level", "1.5")
        self.assertEqual(code, 2)

    def test_missing_source(self):
        code, _, err = self.run_cli("predict")
        self.assertEqual(code, 1)
        self.assertTrue(err.startswith("halvingeta: error:"))

    def test_bad_environment(self):
        code, _, err = self.run_cli(
            "predict", "--height", "1", environ={"HALVINGETA_TIMEOUT": "abc"}
        )
        self.assertEqual(code, 1)
        self.assertIn("HALVINGETA_TIMEOUT", err)


class IntervalTestCase(CLITestCase):
    def test_forty_days(self):
        report = self.run_json("interval", "--eta", "40", "--unit", "day")
        self.assertEqual(report["eta_minutes"], 57600)
        self.assertEqual(round(report["stddev_minutes"]), 759)


class AdjustTestCase(CLITestCase):
    def test_gradual_rise(self):
        report = self.run_json(
            "adjust", "--base-eta", "2016-07-11T01:00Z", "--gradual", "1.0", "1.5"
        )
        self.assertEqual(report["eta_timestamp"], "2016-07-05T08:46Z")
        self.assertAlmostEqual(report["shift_minutes"], -math.log(1.5) * 20160)
        self.assertEqual(report["shift_rule"], "gradual")

    def test_near_step(self):
        report = self.run_json(
            "adjust", "--base-eta", "2016-07-11T01:00Z", "--step-near", "0.05", "300"
        )
        self.assertAlmostEqual(report["shift_minutes"], -150)
        self.assertEqual(report["eta_timestamp"], "2016-07-10T22:30Z")

    def test_zero_step_is_identity(self):
        base = self.run_json("predict", "--blocks-remaining", "5476", "--model", "naive")
        adjusted = self.run_json(
            "adjust", "--blocks-remaining", "5476", "--model", "naive", "--step", "0"
        )
        self.assertEqual(adjusted["eta_minutes"], base["eta_minutes"])
        self.assertEqual(adjusted["intervals"], base["intervals"])

    def test_step_moves_retarget_prediction(self):
        base = self.run_json("predict", "--height", "414524")
        adjusted = self.run_json("adjust", "--height", "414524", "--step", "0.1")
        self.assertAlmostEqual(adjusted["eta_minutes"] - base["eta_minutes"], -2016)
        self.assertEqual(adjusted["stddev_minutes"], base["stddev_minutes"])

    def test_one_change_at_a_time(self):
        code, _, _ = self.run_cli(
            "adjust", "--base-eta", "2016-07-11T01:00Z", "--step", "0.1", "--gradual", "1", "2"
        )
        self.assertEqual(code, 2)

    def test_near_step_outside_final_interval(self):
        code, _, err = self.run_cli(
            "adjust", "--base-eta", "2016-07-11T01:00Z", "--step-near", "0.05", "5000"
        )
        self.assertEqual(code, 1)
        self.assertIn("final retarget", err)


class SimulateTestCase(CLITestCase):
    ARGS = ("simulate", "--k", "10", "--n", "3", "--M", "10", "--trials", "20000", "--seed", "42")

    def test_deterministic_output(self):
        first = self.run_cli(*self.ARGS, "--json")
        second = self.run_cli(*self.ARGS, "--json")
        parallel = self.run_cli(*self.ARGS, "--workers", "2", "--json")
        self.assertEqual(first[0], 0)
        self.assertEqual(first[1], second[1])
        self.assertEqual(first[1], parallel[1])

    def test_report(self):
        report = self.run_json(*self.ARGS)
        self.assertEqual(report["summary"]["trials"], 20000)
        self.assertIn("derived", report["analytic"]["variance"])
        self.assertLess(abs(report["analytic"]["z_mean"]), 4)

    def test_emit_raw(self):
        code, out, _ = self.run_cli(*self.ARGS, "--emit-raw", "-")
        self.assertEqual(code, 0)
        self.assertEqual(len(out.splitlines()), 20000)

    def test_k_below_three(self):
        code, out, err = self.run_cli("simulate", "--k", "2", "--M", "2")
        self.assertEqual(code, 1)
        self.assertEqual(out, "")
        self.assertEqual(len(err.strip().splitlines()), 1)


class ScheduleTestCase(CLITestCase):
    def test_schedule(self):
        report = self.run_json("schedule", "--epochs", "33")
        rows = report["schedule"]
        self.assertEqual(len(rows), 34)
        self.assertEqual((rows[2]["height"], rows[2]["subsidy"]), (420000, 12.5))
        self.assertLessEqual(rows[-1]["cumulative_supply"], 21_000_000)

    def test_version(self):
        code, out, _ = self.run_cli("--version")
        self.assertEqual(code, 0)
        self.assertTrue(out.startswith("halvingeta "))


if __name__ == "__main__":
    unittest.main()
