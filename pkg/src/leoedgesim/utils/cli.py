# The MIT License (MIT)
#
# Copyright (c) 2025 LEOEdgeSim Authors
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in
# all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN
# THE SOFTWARE.
"""CLI utils."""

import argparse
import pathlib
import sys
from collections.abc import Sequence

import pandas as pd
from loguru import logger

from leoedgesim import CONFIG
from leoedgesim.lifecycle import (
    CostModel,
    check_zero_downtime,
    cost_curve,
    plan_timeline,
    write_command_log,
    write_timeline,
    write_violations,
)
from leoedgesim.orbits import DomainError
from leoedgesim.report import (
    compute_metrics,
    metrics_table,
    pareto_sweep,
    run_scenario,
    sweep_table,
    write_metrics,
)
from leoedgesim.strategies import (
    Cardinality,
    StrategyKind,
    StrategySpec,
    read_schedule,
    run_strategy,
    write_schedule,
)
from leoedgesim.strategies.schedule import schedule_table
from leoedgesim.traces import (
    ScenarioConfig,
    Trace,
    generate_trace,
    load_bundled_scenario,
    load_scenario,
    read_trace,
    trace_table,
    write_trace,
)
from leoedgesim.utils.configuration import change_profile, show_config
from leoedgesim.utils.csv_io import CsvParseError, write_csv_table
from leoedgesim.utils.validation import ValidationError

CARDINALITY_FLAGS = ["1:1", "n:1", "n:m"]


def parse_thresholds(value: str) -> list[float]:
    """Parse a threshold list.

    Accepts 'start:stop:step' with an inclusive stop or comma-separated values.

    Args:
        value: Threshold definition, e.g. '0:0.50:0.05'

    Returns:
        Thresholds
    """
    try:
        if ":" in value:
            start, stop, step = (float(part) for part in value.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            n_steps = int(round((stop - start) / step))
            return [round(start + i * step, 10) for i in range(n_steps + 1)]
        return [float(part) for part in value.split(",")]
    except ValueError as exception:
        raise argparse.ArgumentTypeError(
            f"Invalid thresholds '{value}', expected 'start:stop:step' or 'a,b,c'"
        ) from exception


def _existing_path(value: str) -> pathlib.Path:
    """Path that has to exist."""
    path = pathlib.Path(value)
    if not path.exists():
        raise FileNotFoundError(f"Input '{path}' does not exist.")
    return path


def _write_or_print(table: pd.DataFrame, out: pathlib.Path | None) -> None:
    """Write a table to a file or standard output."""
    if out is None:
        sys.stdout.write(table.to_csv(index=False, lineterminator="\n"))
    else:
        write_csv_table(table, out)
        logger.info(f"Wrote {out}")


def _cardinality(flag: str | None, trace: Trace) -> Cardinality:
    """Cardinality from the flag, the trace's scenario or the number of clients."""
    if flag is not None:
        return Cardinality.from_flag(flag)
    if trace.config is not None:
        return Cardinality(trace.config.cardinality)
    return Cardinality.ONE_TO_ONE if trace.n_clients == 1 else Cardinality.MANY_TO_ONE


def strategy_from_arguments(arguments: argparse.Namespace, trace: Trace) -> StrategySpec:
    """Strategy defined by the CLI flags.

    Args:
        arguments: Parsed arguments
        trace: Trace the strategy runs on

    Returns:
        Strategy
    """
    kind = StrategyKind(arguments.strategy)
    tau, delta_ms = arguments.tau, arguments.delta_ms
    if kind == StrategyKind.THRESHOLD and tau is None and delta_ms is None:
        tau = 0.10
    return StrategySpec(
        kind=kind,
        tau=tau,
        delta_ms=delta_ms,
        aggregation=arguments.aggregation,
        cardinality=_cardinality(arguments.cardinality, trace),
        sticky_margin=arguments.sticky_margin,
    )


def _add_strategy_arguments(parser: argparse.ArgumentParser, sweep: bool = False) -> None:
    """Strategy flags shared by several commands."""
    if not sweep:
        parser.add_argument(
            "--strategy",
            choices=[kind.value for kind in StrategyKind],
            default=StrategyKind.MINMAX.value,
            help="Server selection strategy.",
        )
    thresholds = parser.add_mutually_exclusive_group()
    thresholds.add_argument(
        "--tau",
        type=parse_thresholds if sweep else float,
        help="Relative switching threshold"
        + (" list, e.g. '0:0.50:0.05'." if sweep else ", e.g. 0.10."),
    )
    thresholds.add_argument(
        "--delta-ms",
        type=parse_thresholds if sweep else float,
        help="Absolute switching threshold in ms" + (" list." if sweep else "."),
    )
    parser.add_argument(
        "--aggregation", choices=["mean", "rms"], default="mean", help="Latency aggregation."
    )
    parser.add_argument(
        "--cardinality",
        choices=CARDINALITY_FLAGS,
        help="Clients to service instances, defaults to the trace's scenario.",
    )
    if not sweep:
        parser.add_argument(
            "--sticky-margin",
            type=float,
            default=0.10,
            help="Near-optimal band of sticky.",
        )


def _add_lifecycle_arguments(parser: argparse.ArgumentParser) -> None:
    """Migration lifecycle flags shared by several commands."""
    parser.add_argument(
        "--lead-s", type=float, default=CONFIG.lead_time_s, help="Replication lead time."
    )
    parser.add_argument(
        "--payload-mb", type=float, default=CONFIG.payload_mb, help="Replicated state."
    )
    parser.add_argument(
        "--cost-model",
        choices=list(CONFIG.cost_models),
        default="decoupled",
        help="Migration cost model.",
    )


def build_parser() -> argparse.ArgumentParser:
    """Create the argument parser."""
    # Every command is a subparser, add new commands here and to the matching in cli_main
    main_parser = argparse.ArgumentParser(prog="leoedgesim")
    main_parser.add_argument("-v", "--verbose", action="store_true", help="Debug output.")
    subparsers = main_parser.add_subparsers(dest="command", required=True)

    # Trace parser
    trace_parser = subparsers.add_parser("trace", help="Generate a latency trace.")
    scenario_source = trace_parser.add_mutually_exclusive_group(required=True)
    scenario_source.add_argument("--config", type=_existing_path, help="Scenario file.")
    scenario_source.add_argument("--scenario", help="Bundled scenario name.")
    trace_parser.add_argument(
        "--candidates-only",
        type=int,
        help="Keep the union of every client's k lowest-latency satellites.",
    )
    trace_parser.add_argument(
        "--aggregate-candidates",
        type=int,
        help="Keep the k satellites with the lowest mean and RMS latency over all clients.",
    )
    trace_parser.add_argument("--workers", type=int, help="Number of worker processes.")
    trace_parser.add_argument("--seed", type=int, help="Jitter client coordinates.")
    trace_parser.add_argument("--out", type=pathlib.Path, help="Trace CSV.")

    # Schedule parser
    schedule_parser = subparsers.add_parser("schedule", help="Run a strategy over a trace.")
    schedule_parser.add_argument("--trace", type=_existing_path, required=True, help="Trace CSV.")
    _add_strategy_arguments(schedule_parser)
    schedule_parser.add_argument("--out", type=pathlib.Path, help="Schedule directory.")

    # Plan parser
    plan_parser = subparsers.add_parser("plan", help="Expand a schedule into a timeline.")
    plan_parser.add_argument("--trace", type=_existing_path, required=True, help="Trace CSV.")
    plan_parser.add_argument(
        "--schedule", type=_existing_path, help="Schedule directory, else the strategy is run."
    )
    _add_strategy_arguments(plan_parser)
    _add_lifecycle_arguments(plan_parser)
    plan_parser.add_argument("--out", type=pathlib.Path, help="Timeline directory.")

    # Metrics parser
    metrics_parser = subparsers.add_parser("metrics", help="Metrics of a strategy run.")
    metrics_parser.add_argument("--trace", type=_existing_path, required=True, help="Trace CSV.")
    _add_strategy_arguments(metrics_parser)
    _add_lifecycle_arguments(metrics_parser)
    metrics_parser.add_argument("--out", type=pathlib.Path, help="Metrics directory.")

    # Sweep parser
    sweep_parser = subparsers.add_parser("sweep", help="Threshold sweep.")
    sweep_parser.add_argument("--trace", type=_existing_path, required=True, help="Trace CSV.")
    _add_strategy_arguments(sweep_parser, sweep=True)
    sweep_parser.add_argument("--workers", type=int, help="Number of worker processes.")
    sweep_parser.add_argument("--out", type=pathlib.Path, help="Sweep CSV.")

    # Scenario parser
    scenario_parser = subparsers.add_parser(
        "scenario", help="Generate, schedule, plan and measure a bundled scenario."
    )
    scenario_parser.add_argument("name", help="Bundled scenario, e.g. 'single-client'.")
    _add_strategy_arguments(scenario_parser)
    scenario_parser.set_defaults(strategy=None)
    _add_lifecycle_arguments(scenario_parser)
    scenario_parser.add_argument("--workers", type=int, help="Number of worker processes.")
    scenario_parser.add_argument("--seed", type=int, help="Jitter client coordinates.")
    scenario_parser.add_argument("--out", type=pathlib.Path, help="Results directory.")

    # Costs parser
    costs_parser = subparsers.add_parser("costs", help="Migration time over payload.")
    costs_parser.add_argument(
        "--payload-mb",
        type=parse_thresholds,
        default=None,
        help="Payloads, e.g. '0:1000:100'.",
    )
    costs_parser.add_argument("--out", type=pathlib.Path, help="Cost curve CSV.")

    # Config parsers
    subparsers.add_parser("show-config", help="Show the LEOEdgeSim config.")
    switch_config_profile_parser = subparsers.add_parser(
        "switch-config-profile", help="Switch config profile."
    )
    switch_config_profile_parser.add_argument(
        "profile", help="LEOEdgeSim config profile name.", type=str
    )
    return main_parser


def _trace_command(arguments: argparse.Namespace) -> None:
    """Generate a trace."""
    config: ScenarioConfig = (
        load_scenario(arguments.config, arguments.seed)
        if arguments.config is not None
        else load_bundled_scenario(arguments.scenario, arguments.seed)
    )
    trace = generate_trace(
        config, arguments.workers, arguments.candidates_only, arguments.aggregate_candidates
    )
    if arguments.out is None:
        _write_or_print(trace_table(trace), None)
    else:
        write_trace(trace, arguments.out)
        logger.info(f"Wrote {arguments.out}")


def _plan_command(arguments: argparse.Namespace) -> None:
    """Expand a schedule into a timeline."""
    trace = read_trace(arguments.trace)
    schedule = (
        read_schedule(arguments.schedule)
        if arguments.schedule is not None
        else run_strategy(trace, strategy_from_arguments(arguments, trace))
    )
    timeline, commands = plan_timeline(
        schedule,
        arguments.lead_s,
        CostModel.from_config(arguments.cost_model),
        arguments.payload_mb,
    )
    violations = check_zero_downtime(timeline, schedule, trace)
    logger.info(
        f"Overlap fraction {timeline.overlap_fraction:.4f}, {len(timeline.unready)} unready "
        f"replicas, {len(violations.violations)} violations"
    )
    if arguments.out is None:
        _write_or_print(timeline.to_table(), None)
    else:
        write_timeline(timeline, arguments.out / "timeline.csv")
        write_violations(violations, arguments.out / "violations.csv")
        write_command_log(commands, arguments.out / "commands.csv")


def _metrics_command(arguments: argparse.Namespace) -> None:
    """Metrics of a strategy run."""
    trace = read_trace(arguments.trace)
    cost_model = CostModel.from_config(arguments.cost_model)
    schedule = run_strategy(trace, strategy_from_arguments(arguments, trace))
    timeline, _ = plan_timeline(schedule, arguments.lead_s, cost_model, arguments.payload_mb)
    report = compute_metrics(trace, schedule, timeline, cost_model, arguments.payload_mb)
    if arguments.out is None:
        _write_or_print(metrics_table([report]), None)
    else:
        write_metrics([report], arguments.out)
    logger.info(str(report))


def _sweep_command(arguments: argparse.Namespace) -> None:
    """Threshold sweep."""
    trace = read_trace(arguments.trace)
    absolute = arguments.delta_ms is not None
    thresholds = arguments.delta_ms if absolute else arguments.tau
    if thresholds is None:
        thresholds = parse_thresholds("0:0.50:0.05")
    template = StrategySpec(
        kind=StrategyKind.MINMAX,
        aggregation=arguments.aggregation,
        cardinality=_cardinality(arguments.cardinality, trace),
    )
    rows = pareto_sweep(trace, thresholds, template, absolute, arguments.workers)
    _write_or_print(sweep_table(rows), arguments.out)


def _scenario_command(arguments: argparse.Namespace) -> None:
    """Run a bundled scenario."""
    config = load_bundled_scenario(arguments.name, arguments.seed)
    strategies = None
    if arguments.strategy is None and (
        arguments.tau is not None or arguments.delta_ms is not None
    ):
        logger.info("A switching threshold was given, running the threshold strategy")
        arguments.strategy = StrategyKind.THRESHOLD.value
    if arguments.strategy is not None:
        kind = StrategyKind(arguments.strategy)
        tau = arguments.tau
        if kind == StrategyKind.THRESHOLD and tau is None and arguments.delta_ms is None:
            tau = 0.10
        strategies = [
            StrategySpec(
                kind=kind,
                tau=tau,
                delta_ms=arguments.delta_ms,
                aggregation=arguments.aggregation,
                cardinality=(
                    Cardinality.from_flag(arguments.cardinality)
                    if arguments.cardinality
                    else config.cardinality
                ),
                sticky_margin=arguments.sticky_margin,
            )
        ]
    out = arguments.out or pathlib.Path.cwd() / "results" / config.name
    reports = run_scenario(
        config,
        out,
        strategies,
        CostModel.from_config(arguments.cost_model),
        arguments.lead_s,
        arguments.payload_mb,
        arguments.workers,
    )
    for report in reports:
        logger.info(str(report))
    logger.info(f"Results in {out}")


def cli_main(argv: Sequence[str]) -> int:
    """Run the CLI.

    Args:
        argv: Arguments without the program name

    Returns:
        Exit code, 2 for usage errors and missing inputs, 1 for other errors
    """
    try:
        arguments = build_parser().parse_args(list(argv))
    except FileNotFoundError as exception:
        # Raised by the path type of an argument
        sys.stderr.write(f"leoedgesim: error: {exception}\n")
        return 2
    except SystemExit as exception:
        return int(exception.code or 0)

    # Set up the logger, data goes to standard output and messages to standard error
    logger.enable("leoedgesim")
    logger.remove()
    logger.add(sys.stderr, format="{message}", level="DEBUG" if arguments.verbose else "INFO")

    try:
        match arguments.command:
            case "trace":
                _trace_command(arguments)
            case "schedule":
                trace = read_trace(arguments.trace)
                schedule = run_strategy(trace, strategy_from_arguments(arguments, trace))
                if arguments.out is None:
                    _write_or_print(schedule_table(schedule), None)
                else:
                    write_schedule(schedule, arguments.out)
            case "plan":
                _plan_command(arguments)
            case "metrics":
                _metrics_command(arguments)
            case "sweep":
                _sweep_command(arguments)
            case "scenario":
                _scenario_command(arguments)
            case "costs":
                models = {name: CostModel.from_config(name) for name in CONFIG.cost_models}
                _write_or_print(cost_curve(models, arguments.payload_mb), arguments.out)
            case "show-config":
                show_config()
            case "switch-config-profile":
                change_profile(arguments.profile)
    except FileNotFoundError as exception:
        logger.error(str(exception))
        return 2
    except (CsvParseError, DomainError, KeyError, ValidationError, ValueError) as exception:
        logger.error(f"{type(exception).__name__}: {exception}")
        return 1
    return 0


def main() -> None:
    """Main CLI interface."""
    sys.exit(cli_main(sys.argv[1:]))
