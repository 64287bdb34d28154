import argparse
import dataclasses
import json
import logging
import sys

from halvingeta import __version__
from halvingeta.halvingeta_common.hashrate import (
    apply_shift,
    gradual_shift,
    step_shift_far,
    step_shift_near,
)
from halvingeta.halvingeta_common.ingest import (
    estimate_hashrate,
    fetch_snapshot_http,
    load_snapshot_file,
    model_inputs,
)
from halvingeta.halvingeta_common.models import (
    HalvingError,
    OutputReport,
    ParameterError,
    Prediction,
    RetargetParams,
    RetargetPosition,
)
from halvingeta.halvingeta_common.naive import (
    DEFAULT_LEVELS,
    confidence_intervals,
    naive_prediction,
    naive_stddev_from_eta,
    normal_quantile,
)
from halvingeta.halvingeta_common.retarget import (
    DEFAULT_COVARIANCE_MODE,
    CovarianceMode,
    VarianceForm,
    position_from_blocks_remaining,
    position_from_heights,
    retarget_eta,
    retarget_prediction,
    retarget_variance,
    variance_profile,
)
from halvingeta.halvingeta_common.schedule import next_halving_height, schedule_table
from halvingeta.halvingeta_common.settings import Settings
from halvingeta.halvingeta_common.simulator import (
    DEFAULT_SEED,
    Granularity,
    SimulationConfig,
    simulate_intervals,
    summarize,
    write_raw,
)
from halvingeta.halvingeta_common.units import (
    Unit,
    add_duration,
    format_duration,
    format_timestamp,
    from_unit,
    isoformat_utc,
    now,
    parse_timestamp,
    parse_unit,
)

logger = logging.getLogger("halvingeta")

# `paper` and `printed` select the same coefficient
COVARIANCE_CHOICES = {
    "paper": CovarianceMode.PRINTED,
    "printed": CovarianceMode.PRINTED,
    "derived": CovarianceMode.DERIVED,
}


class ArgumentParser(argparse.ArgumentParser):
    """argparse with a one-line diagnostic on bad arguments."""

    def error(self, message):
        self.exit(2, f"{self.prog}: error: {message}\n")


def level_type(text):
    try:
        level = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid level {text!r}")
    if not 0.0 < level < 1.0:
        raise argparse.ArgumentTypeError(f"level must be in (0, 1), got {text}")
    return level


def timestamp_type(text):
    try:
        return parse_timestamp(text)
    except HalvingError as e:
        raise argparse.ArgumentTypeError(str(e))


class HalvingCLI:
    def __init__(self, argv=None, environ=None):
        self.settings = Settings(environ)

        #######################################################################
        # Argument parsing with argparse

        # Create the top-level argument parser
        parser = ArgumentParser(
            description="Predict the time of the next Bitcoin block-reward halving",
            prog="halvingeta",
        )
        parser.add_argument("--version", action="version", version=f"halvingeta {__version__}")
        parser.add_argument(
            "-v", "--verbose", action="count", default=0, help="More logging (repeatable)"
        )
        subparsers = parser.add_subparsers(dest="command", metavar="command")
        subparsers.required = True

        # predict
        predict = subparsers.add_parser("predict", help="Halving ETA, deviation and intervals")
        self.add_input_arguments(predict)
        self.add_model_arguments(predict)
        self.add_output_arguments(predict)
        predict.add_argument(
            "--profile",
            type=int,
            metavar="N",
            help="Also report sigma for 1..N intervals before the halving (retarget model)",
        )
        predict.set_defaults(func=self.cmd_predict)

        # interval
        interval = subparsers.add_parser(
            "interval", help="Deviation and intervals from a known ETA (constant difficulty)"
        )
        interval.add_argument("--eta", type=float, required=True, help="Expected time to halving")
        interval.add_argument(
            "--unit",
            default=Unit.MINUTE.value,
            choices=[unit.value for unit in Unit],
            help="Unit of --eta",
        )
        self.add_output_arguments(interval)
        interval.set_defaults(func=self.cmd_interval)

        # adjust
        adjust = subparsers.add_parser("adjust", help="Shift a prediction for a hashrate change")
        self.add_input_arguments(adjust, base=True)
        self.add_model_arguments(adjust)
        self.add_output_arguments(adjust)
        adjust.add_argument("--base-stddev", type=float, help="Deviation (min) of --base-eta")
        shift = adjust.add_mutually_exclusive_group(required=True)
        shift.add_argument("--step", type=float, metavar="X", help="Step change by fraction X")
        shift.add_argument(
            "--gradual",
            type=float,
            nargs=2,
            metavar=("H1", "H2"),
            help="Slow change from hashrate H1 to H2",
        )
        shift.add_argument(
            "--step-near",
            nargs=2,
            metavar=("X", "BLOCKS"),
            help="Step change by fraction X with BLOCKS left in the final interval",
        )
        adjust.set_defaults(func=self.cmd_adjust)

        # simulate
        simulate = subparsers.add_parser("simulate", help="Monte Carlo of the retarget model")
        simulate.add_argument("--k", type=int, default=2016, help="Blocks per retarget interval")
        simulate.add_argument("--n", type=int, default=1, help="Interval holding the halving")
        simulate.add_argument("--M", type=int, help="Blocks into interval n (default k)")
        simulate.add_argument("--trials", type=int, default=100_000)
        simulate.add_argument("--seed", type=int, default=DEFAULT_SEED)
        simulate.add_argument(
            "--granularity",
            default=Granularity.PER_INTERVAL.value,
            choices=[granularity.value for granularity in Granularity],
        )
        simulate.add_argument(
            "--no-retarget", action="store_true", help="Keep the difficulty fixed"
        )
        simulate.add_argument(
            "--hashrate-factor", type=float, default=1.0, help="H2/H1 applied from --step-interval"
        )
        simulate.add_argument("--step-interval", type=int, default=1)
        simulate.add_argument("--workers", type=int, default=1)
        simulate.add_argument(
            "--emit-raw",
            metavar="PATH",
            help="Write every trial's T (minutes), one per line; '-' for stdout",
        )
        simulate.add_argument("--json", action="store_true", help="Emit a JSON report")
        simulate.set_defaults(func=self.cmd_simulate)

        # schedule
        schedule = subparsers.add_parser("schedule", help="Halving heights and subsidies")
        schedule.add_argument("--epochs", type=int, default=4, help="Last epoch to list")
        schedule.add_argument("--json", action="store_true", help="Emit a JSON report")
        schedule.set_defaults(func=self.cmd_schedule)

        # Parse arguments
        self.args = parser.parse_args(argv)
        logging.basicConfig(
            level={0: logging.WARNING, 1: logging.INFO}.get(self.args.verbose, logging.DEBUG),
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )

    def add_input_arguments(self, parser, base=False):
        source = parser.add_mutually_exclusive_group()
        source.add_argument("--height", type=int, help="Current block height")
        source.add_argument("--blocks-remaining", type=int, help="Blocks left until the halving")
        source.add_argument("--snapshot", help="Header snapshot file (JSON lines)")
        source.add_argument("--endpoint", help="Header endpoint base URL")
        if base:
            source.add_argument("--base-eta", type=timestamp_type, help="Predicted halving time")
        parser.add_argument("--window", type=int, help="Headers to fetch from --endpoint")
        parser.add_argument("--timeout", type=float, help="HTTP timeout in seconds")
        parser.add_argument("--k", type=int, default=2016, help="Blocks per retarget interval")

    def add_model_arguments(self, parser):
        parser.add_argument("--model", default="retarget", choices=["naive", "retarget"])
        parser.add_argument(
            "--covariance",
            default=DEFAULT_COVARIANCE_MODE.value,
            choices=list(COVARIANCE_CHOICES),
        )
        parser.add_argument(
            "--variance",
            default=VarianceForm.FULL.value,
            choices=[form.value for form in VarianceForm],
        )

    def add_output_arguments(self, parser):
        parser.add_argument(
            "--level",
            type=level_type,
            action="append",
            dest="levels",
            help="Confidence level (repeatable, default 0.683 and 0.955)",
        )
        parser.add_argument("--now", type=timestamp_type, help="Current time (UTC)")
        parser.add_argument("--json", action="store_true", help="Emit a JSON report")

    def run(self):
        """Run the selected command and print its report"""
        try:
            report = self.args.func(self.args)
        except HalvingError as e:
            print(f"halvingeta: error: {e}", file=sys.stderr)
            return 1

        if report is None:
            return 0

        if self.args.json:
            print(json.dumps(report.to_mapping(), sort_keys=True))
        else:
            print(self.render(report))
        return 0

    ###########################################################################
    # Input resolution

    def levels(self, args):
        return tuple(args.levels) if args.levels else DEFAULT_LEVELS

    def params(self, args):
        return RetargetParams(k=args.k)

    def covariance(self, args):
        return COVARIANCE_CHOICES[args.covariance]

    def resolve_start(self, args, snapshot_time=None):
        if args.now is not None:
            return args.now
        if snapshot_time is not None:
            return snapshot_time
        if sys.stdout.isatty():
            logger.warning("no --now given; using the wall clock for calendar output")
            return now()
        return None

    def resolve_inputs(self, args):
        """Return (blocks remaining, position or None, snapshot time or None, echo)"""
        self.settings.override(window=args.window, timeout=args.timeout, endpoint=args.endpoint)
        params = self.params(args)
        echo = {"k": params.k}

        if args.height is not None:
            halving = next_halving_height(args.height)
            blocks = halving - args.height
            position = position_from_heights(args.height, halving, params)
            echo.update(source="height", height=args.height, halving_height=halving)
            return blocks, position, None, echo

        if args.blocks_remaining is not None:
            blocks = args.blocks_remaining
            if blocks < 0:
                raise ParameterError(f"blocks remaining must be >= 0, got {blocks}")
            position = position_from_blocks_remaining(blocks, params) if blocks else None
            echo.update(source="blocks_remaining", blocks_remaining=blocks)
            return blocks, position, None, echo

        if args.snapshot is not None:
            snapshot = load_snapshot_file(args.snapshot)
            echo.update(source="snapshot", snapshot=args.snapshot)
        elif self.settings.settings["endpoint"]:
            snapshot = fetch_snapshot_http(
                self.settings.settings["endpoint"],
                self.settings.settings["window"],
                timeout=self.settings.settings["timeout"],
            )
            echo.update(source="endpoint", **self.settings.as_mapping())
        else:
            raise ParameterError(
                "one of --height, --blocks-remaining, --snapshot or --endpoint is required"
            )

        inputs = model_inputs(snapshot, params)
        echo.update(
            tip_height=snapshot.tip.height,
            tip_time=isoformat_utc(snapshot.tip.time),
            halving_height=inputs.halving_height,
            headers=len(snapshot),
        )
        if len(snapshot) >= 2:
            echo["hashrate_per_minute"] = estimate_hashrate(snapshot)
        return inputs.blocks_remaining, inputs.position, snapshot.tip.time, echo

    def build_prediction(self, args, blocks, position):
        params = self.params(args)
        levels = self.levels(args)

        if blocks == 0:
            return Prediction(
                model=args.model,
                eta=0.0,
                variance=0.0,
                stddev=0.0,
                blocks_remaining=0,
                intervals=confidence_intervals(0.0, 0.0, levels),
            )

        if args.model == "naive":
            return naive_prediction(blocks, levels)

        prediction = retarget_prediction(
            blocks, position, params, self.covariance(args), VarianceForm(args.variance), levels
        )
        if VarianceForm(args.variance) is VarianceForm.FULL and prediction.position.n == 1:
            note = (
                "the halving falls in the current retarget interval, so the deviation covers "
                "that interval only; --variance simplified gives the far-horizon figure"
            )
            prediction = dataclasses.replace(prediction, warnings=prediction.warnings + (note,))
        return prediction

    def echo_model(self, args, echo):
        echo.update(model=args.model, levels=list(self.levels(args)))
        if args.model == "retarget":
            echo.update(covariance=self.covariance(args).value, variance=args.variance)
        if args.now is not None:
            echo["now"] = isoformat_utc(args.now)
        return echo

    ###########################################################################
    # Commands

    def cmd_predict(self, args):
        blocks, position, snapshot_time, echo = self.resolve_inputs(args)
        prediction = self.build_prediction(args, blocks, position)
        prediction = dataclasses.replace(
            prediction, start=self.resolve_start(args, snapshot_time)
        )
        report = self.prediction_report("predict", prediction, self.echo_model(args, echo))

        if args.profile:
            if args.model != "retarget" or position is None:
                raise ParameterError("--profile needs the retarget model and blocks remaining")
            report.extra["profile"] = [
                {"n": n, "eta_minutes": eta, "stddev_minutes": stddev}
                for n, eta, stddev in variance_profile(
                    position.M,
                    self.params(args),
                    self.covariance(args),
                    args.profile,
                )
            ]
        return report

    def cmd_interval(self, args):
        eta = from_unit(args.eta, parse_unit(args.unit))
        stddev = naive_stddev_from_eta(eta)
        levels = self.levels(args)
        prediction = Prediction(
            model="naive",
            eta=eta,
            variance=stddev**2,
            stddev=stddev,
            blocks_remaining=int(round(eta / 10.0)),
            intervals=confidence_intervals(eta, stddev, levels),
            start=self.resolve_start(args),
        )
        echo = {"eta": args.eta, "unit": args.unit, "levels": list(levels)}
        if args.now is not None:
            echo["now"] = isoformat_utc(args.now)
        return self.prediction_report("interval", prediction, echo)

    def cmd_adjust(self, args):
        params = self.params(args)

        if args.base_eta is not None:
            start = args.now or args.base_eta
            eta = (args.base_eta - start).total_seconds() / 60.0
            stddev = args.base_stddev or 0.0
            base = Prediction(
                model="given",
                eta=eta,
                variance=stddev**2,
                stddev=stddev,
                blocks_remaining=0,
                intervals=confidence_intervals(eta, stddev, self.levels(args)),
                start=start,
            )
            echo = {"source": "base_eta", "base_eta": isoformat_utc(args.base_eta)}
            echo["levels"] = list(self.levels(args))
        else:
            blocks, position, snapshot_time, echo = self.resolve_inputs(args)
            base = dataclasses.replace(
                self.build_prediction(args, blocks, position),
                start=self.resolve_start(args, snapshot_time),
            )
            echo = self.echo_model(args, echo)

        if args.step is not None:
            shift = step_shift_far(args.step, params)
            echo["step"] = args.step
        elif args.gradual is not None:
            shift = gradual_shift(args.gradual[0], args.gradual[1], params)
            echo["gradual"] = list(args.gradual)
        else:
            try:
                x, blocks_left = float(args.step_near[0]), int(args.step_near[1])
            except ValueError:
                raise ParameterError("--step-near takes a fraction and a whole number of blocks")
            shift = step_shift_near(x, blocks_left, params)
            echo["step_near"] = [x, blocks_left]

        report = self.prediction_report("adjust", apply_shift(base, shift), echo)
        report.extra["base_eta_minutes"] = base.eta
        report.extra["shift_rule"] = shift.rule
        return report

    def cmd_simulate(self, args):
        config = SimulationConfig(
            k=args.k,
            n=args.n,
            M=args.M,
            trials=args.trials,
            seed=args.seed,
            granularity=Granularity(args.granularity),
            retarget=not args.no_retarget,
            hashrate_factor=args.hashrate_factor,
            step_interval=args.step_interval,
            workers=args.workers,
        )
        intervals = simulate_intervals(config)
        summary = summarize(config, intervals)

        if args.emit_raw == "-":
            write_raw(intervals.sum(axis=1), sys.stdout)
            return None
        if args.emit_raw:
            with open(args.emit_raw, "w", encoding="utf-8") as out:
                write_raw(intervals.sum(axis=1), out)

        report = OutputReport(
            command="simulate",
            inputs_echo=config.to_mapping(),
            eta_minutes=summary.mean_T,
            stddev_minutes=summary.var_T**0.5,
            variance=summary.var_T,
            extra={"summary": summary.to_mapping()},
        )

        if config.retarget and config.hashrate_factor == 1.0:
            position = RetargetPosition(config.n, config.M)
            eta = retarget_eta(position, config.params)
            report.model = "retarget"
            report.extra["analytic"] = {
                "eta_minutes": eta,
                "z_mean": (summary.mean_T - eta) / summary.se_mean if summary.se_mean else None,
                "variance": {
                    mode.value: retarget_variance(position, config.params, mode)
                    for mode in CovarianceMode
                },
            }
        return report

    def cmd_schedule(self, args):
        rows = schedule_table(args.epochs)
        return OutputReport(
            command="schedule",
            inputs_echo={"epochs": args.epochs},
            extra={"schedule": [row.to_mapping() for row in rows]},
        )

    ###########################################################################
    # Output

    def prediction_report(self, command, prediction, echo):
        report = OutputReport(
            command=command,
            inputs_echo=echo,
            model=prediction.model,
            eta_minutes=prediction.eta,
            stddev_minutes=prediction.stddev,
            variance=prediction.variance,
            shift_minutes=prediction.shift if command == "adjust" else None,
            warnings=list(prediction.warnings),
        )
        report.extra["blocks_remaining"] = prediction.blocks_remaining
        if prediction.position is not None:
            report.extra["position"] = prediction.position.to_mapping()

        for interval in prediction.intervals:
            values = interval.to_mapping()
            values["z"] = normal_quantile(interval.level)
            if prediction.start is not None:
                values["lower_timestamp"] = isoformat_utc(
                    add_duration(prediction.start, interval.lower)
                )
                values["upper_timestamp"] = isoformat_utc(
                    add_duration(prediction.start, interval.upper)
                )
            report.intervals.append(values)

        if prediction.start is not None:
            report.eta_timestamp = isoformat_utc(add_duration(prediction.start, prediction.eta))
        return report

    def render(self, report):
        """Human-readable report"""
        lines = [("halvingeta " + __version__).ljust(60) + (report.model or "").rjust(20), ""]

        if report.command == "schedule":
            lines.append(
                "Epoch".ljust(8)
                + "Height".rjust(12)
                + "Subsidy".rjust(14)
                + "Supply at end".rjust(20)
                + "Years".rjust(8)
            )
            for row in report.extra["schedule"]:
                lines.append(
                    str(row["epoch"]).ljust(8)
                    + str(row["height"]).rjust(12)
                    + "{:g}".format(row["subsidy"]).rjust(14)
                    + "{:,.8f}".format(row["cumulative_supply"]).rjust(20)
                    + "{:.1f}".format(row["years_from_genesis"]).rjust(8)
                )
            return "\n".join(lines)

        if report.command == "simulate":
            summary = report.extra["summary"]
            lines.append(self.row("Trials", summary["trials"]))
            lines.append(
                self.row(
                    "Mean T",
                    "{} ({:.3f} +/- {:.3f} min)".format(
                        format_duration(summary["mean_T"]), summary["mean_T"], summary["se_mean"]
                    ),
                )
            )
            lines.append(
                self.row(
                    "Variance T", "{:.1f} +/- {:.1f} min^2".format(summary["var_T"], summary["se_var"])
                )
            )
            if summary["cov_adjacent"] is not None:
                lines.append(
                    self.row(
                        "Adjacent covariance",
                        "{:.5f} +/- {:.5f}".format(summary["cov_adjacent"], summary["se_cov"]),
                    )
                )
            analytic = report.extra.get("analytic")
            if analytic:
                lines.append(self.row("Analytic mean", "{:.3f} min".format(analytic["eta_minutes"])))
                for mode, variance in analytic["variance"].items():
                    lines.append(self.row(f"Analytic variance ({mode})", "{:.1f}".format(variance)))
            return "\n".join(lines)

        lines.append(self.row("Blocks remaining", report.extra["blocks_remaining"]))
        if "position" in report.extra:
            position = report.extra["position"]
            lines.append(self.row("Position", "n={}, M={}".format(position["n"], position["M"])))
        if report.shift_minutes is not None:
            lines.append(
                self.row(
                    "Shift",
                    "{} ({:.1f} min, {})".format(
                        format_duration(report.shift_minutes),
                        report.shift_minutes,
                        report.extra["shift_rule"],
                    ),
                )
            )
        lines.append(
            self.row(
                "Expected time",
                "{} ({:.1f} min)".format(format_duration(report.eta_minutes), report.eta_minutes),
            )
        )
        lines.append(
            self.row(
                "Standard deviation",
                "{} ({:.1f} min)".format(
                    format_duration(report.stddev_minutes), report.stddev_minutes
                ),
            )
        )
        if report.eta_timestamp:
            lines.append(
                self.row("Estimated halving", format_timestamp(parse_timestamp(report.eta_timestamp)))
            )

        for interval in report.intervals:
            label = "{:.1%} interval".format(interval["level"])
            if "lower_timestamp" in interval:
                value = "{} .. {}".format(
                    format_timestamp(parse_timestamp(interval["lower_timestamp"])),
                    format_timestamp(parse_timestamp(interval["upper_timestamp"])),
                )
            else:
                value = "{} .. {}".format(
                    format_duration(interval["lower_minutes"]),
                    format_duration(interval["upper_minutes"]),
                )
            lines.append(self.row(label, value))

        for profile in report.extra.get("profile", []):
            lines.append(
                self.row(
                    "Sigma at n={}".format(profile["n"]), format_duration(profile["stddev_minutes"])
                )
            )

        for warning in report.warnings:
            lines.append("")
            lines.append("Warning: " + warning)

        return "\n".join(lines)

    def row(self, label, value):
        return label.ljust(28) + str(value)


def main(argv=None, environ=None):
    try:
        cli = HalvingCLI(argv, environ)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 1
    except HalvingError as e:
        print(f"halvingeta: error: {e}", file=sys.stderr)
        return 1
    return cli.run()


if __name__ == "__main__":
    sys.exit(main())
