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
"""Metrics, threshold sweeps and scenario runs."""

from __future__ import annotations

import math
import pathlib
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from loguru import logger

from leoedgesim import CONFIG
from leoedgesim.lifecycle import (
    CostModel,
    MigrationTimeline,
    check_zero_downtime,
    downtime_fraction,
    plan_timeline,
    write_command_log,
    write_timeline,
    write_violations,
)
from leoedgesim.strategies import (
    NO_SATELLITE,
    Cardinality,
    Schedule,
    StrategySpec,
    run_strategy,
    write_schedule,
)
from leoedgesim.traces import ScenarioConfig, Trace, generate_trace, write_trace
from leoedgesim.utils.converter import CONVERTER
from leoedgesim.utils.csv_io import write_csv_table
from leoedgesim.utils.type_hinting import FloatArray, IntArray, Path
from leoedgesim.utils.yaml_io import dump_yaml

METRICS_COLUMNS = [
    "strategy",
    "mean_rtt_ms",
    "median_rtt_ms",
    "p99_rtt_ms",
    "migration_count",
    "mean_residency_s",
    "mean_replicas",
    "max_replicas",
    "overlap_fraction",
    "downtime_fraction",
]
SWEEP_COLUMNS = ["threshold", "unit", "migration_count", "p99_rtt_ms", "mean_rtt_ms", "pareto"]


def percentile_nearest_rank(values: Sequence[float] | FloatArray, percentile: float) -> float:
    """Percentile by the nearest-rank method.

    Args:
        values: Samples
        percentile: Percentile in (0, 100]

    Returns:
        Smallest sample with at least the given share of samples at or below it, NaN without
        samples
    """
    values = np.sort(np.asarray(values, dtype=float))
    if values.size == 0:
        return math.nan
    rank = max(1, math.ceil(percentile / 100.0 * values.size))
    return float(values[rank - 1])


@dataclass
class MetricsReport:
    """Metrics of a strategy run.

    Attributes:
        strategy: Strategy name
        samples: RTT per covered (t, client) after ramp-up, columns t_s, site_id, rtt_ms
        mean_rtt_ms: Mean RTT
        median_rtt_ms: Median RTT
        p99_rtt_ms: 99th percentile RTT, nearest rank
        per_client_mean_rtt_ms: Mean RTT per client
        covered_share: Share of (t, client) pairs after ramp-up with an RTT sample
        migration_count: Number of hand-offs without bootstrap
        durations_s: Time since the previous hand-off of the same service for every hand-off
        mean_residency_s: Mean of the durations
        replica_counts: Replicas per timestep
        mean_replicas: Mean replicas per timestep
        max_replicas: Maximum replicas
        overlap_fraction: Share of time spent replicating ahead of hand-offs
        downtime_fraction: Share of time the service is down
    """

    strategy: str
    samples: pd.DataFrame = field(repr=False)
    mean_rtt_ms: float
    median_rtt_ms: float
    p99_rtt_ms: float
    per_client_mean_rtt_ms: dict[str, float]
    covered_share: float
    migration_count: int
    durations_s: list[float]
    mean_residency_s: float
    replica_counts: IntArray = field(repr=False)
    mean_replicas: float
    max_replicas: int
    overlap_fraction: float = 0.0
    downtime_fraction: float = 0.0

    def row(self) -> dict:
        """Metrics table row."""
        return {name: getattr(self, name) for name in METRICS_COLUMNS}

    def summary(self) -> dict:
        """Metrics with plain values for YAML dumps."""
        return CONVERTER(
            self.row()
            | {
                "durations_s": self.durations_s,
                "per_client_mean_rtt_ms": self.per_client_mean_rtt_ms,
                "covered_share": self.covered_share,
            }
        )

    def __str__(self) -> str:
        """Human readable summary."""
        return (
            f"{self.strategy}: mean RTT {self.mean_rtt_ms:.2f} ms, median "
            f"{self.median_rtt_ms:.2f} ms, p99 {self.p99_rtt_ms:.2f} ms, "
            f"{self.migration_count} migrations, mean residency {self.mean_residency_s:.1f} s, "
            f"replicas mean {self.mean_replicas:.2f} max {self.max_replicas}"
        )


def _ramp_up_end(trace: Trace) -> int:
    """First timestep included in metrics."""
    return int(trace.times[0]) + trace.ramp_up_s if len(trace.times) else 0


def _rtt_samples(trace: Trace, schedule: Schedule) -> pd.DataFrame:
    """RTT of every assigned (t, client) after ramp-up."""
    ramp_up_end = _ramp_up_end(trace)
    t_values, clients, rtts = [], [], []
    for step_index, frame in enumerate(trace.frames()):
        if frame.t < ramp_up_end:
            continue
        sats = schedule.assignment[step_index]
        assigned = np.flatnonzero(sats != NO_SATELLITE)
        latencies = frame.latency_ms[assigned, sats[assigned]]
        valid = ~np.isnan(latencies)
        t_values.extend([frame.t] * int(valid.sum()))
        clients.extend(trace.clients[i] for i in assigned[valid])
        rtts.extend((2.0 * latencies[valid]).tolist())
    return pd.DataFrame({"t_s": t_values, "site_id": clients, "rtt_ms": rtts})


def _durations(schedule: Schedule) -> list[float]:
    """Time since the previous event of the same service instance for every hand-off."""
    per_client = schedule.spec.cardinality == Cardinality.ONE_TO_ONE
    last_event: dict[str, int] = {}
    durations = []
    for event in schedule.migrations:
        service = min(event.affected_clients) if per_client else "service"
        if not event.bootstrap:
            durations.append(float(event.t_handoff - last_event[service]))
        last_event[service] = event.t_handoff
    return durations


def compute_metrics(
    trace: Trace,
    schedule: Schedule,
    timeline: MigrationTimeline | None = None,
    cost_model: CostModel | None = None,
    payload_mb: float = 0.0,
) -> MetricsReport:
    """Metrics of a schedule.

    Args:
        trace: Trace the schedule was computed on
        schedule: Schedule
        timeline: Timeline of the schedule, provides the overlap fraction
        cost_model: Cost model for the downtime fraction
        payload_mb: Replicated state for the downtime fraction

    Returns:
        Metrics
    """
    samples = _rtt_samples(trace, schedule)
    rtts = samples["rtt_ms"].to_numpy()
    durations = _durations(schedule)
    mean_residency = float(np.mean(durations)) if durations else math.nan

    n_pairs = int(np.sum(trace.times >= _ramp_up_end(trace))) * trace.n_clients

    downtime = 0.0
    if cost_model is not None and durations and mean_residency > 0:
        downtime = downtime_fraction(cost_model, payload_mb, mean_residency).fraction

    replica_counts = schedule.replica_counts
    report = MetricsReport(
        strategy=schedule.spec.name,
        samples=samples,
        mean_rtt_ms=float(np.mean(rtts)) if rtts.size else math.nan,
        median_rtt_ms=float(np.median(rtts)) if rtts.size else math.nan,
        p99_rtt_ms=percentile_nearest_rank(rtts, 99.0),
        per_client_mean_rtt_ms={
            str(site_id): float(rtt)
            for site_id, rtt in samples.groupby("site_id")["rtt_ms"].mean().items()
        },
        covered_share=rtts.size / n_pairs if n_pairs else 0.0,
        migration_count=schedule.migration_count,
        durations_s=durations,
        mean_residency_s=mean_residency,
        replica_counts=replica_counts,
        mean_replicas=float(np.mean(replica_counts)) if replica_counts.size else 0.0,
        max_replicas=int(np.max(replica_counts)) if replica_counts.size else 0,
        overlap_fraction=timeline.overlap_fraction if timeline is not None else 0.0,
        downtime_fraction=downtime,
    )
    logger.info(report)
    return report


def metrics_table(reports: Sequence[MetricsReport]) -> pd.DataFrame:
    """Per-strategy metrics table."""
    return pd.DataFrame([report.row() for report in reports], columns=METRICS_COLUMNS)


def write_metrics(reports: Sequence[MetricsReport], out_dir: Path) -> pathlib.Path:
    """Write metrics.csv, rtt_samples.csv, replicas_series.csv and metrics.yaml.

    Args:
        reports: Metrics of several strategies
        out_dir: Output directory

    Returns:
        Path of metrics.csv
    """
    out_dir = pathlib.Path(out_dir)
    path = write_csv_table(metrics_table(reports), out_dir / "metrics.csv")
    write_csv_table(
        pd.concat(
            [report.samples.assign(strategy=report.strategy) for report in reports],
            ignore_index=True,
        )[["strategy", "t_s", "site_id", "rtt_ms"]]
        if reports
        else pd.DataFrame(columns=["strategy", "t_s", "site_id", "rtt_ms"]),
        out_dir / "rtt_samples.csv",
    )
    write_csv_table(
        pd.DataFrame(
            [
                {"strategy": report.strategy, "step": step, "replicas": int(count)}
                for report in reports
                for step, count in enumerate(report.replica_counts)
            ],
            columns=["strategy", "step", "replicas"],
        ),
        out_dir / "replicas_series.csv",
    )
    dump_yaml({report.strategy: report.summary() for report in reports}, out_dir / "metrics.yaml")
    return path


@dataclass(frozen=True)
class SweepRow:
    """Result of one threshold.

    Attributes:
        threshold: tau as fraction or delta in ms
        absolute: The threshold is delta in ms
        migration_count: Number of hand-offs
        p99_rtt_ms: 99th percentile RTT
        mean_rtt_ms: Mean RTT
        pareto: Not dominated in migrations and p99 RTT by another row
    """

    threshold: float
    absolute: bool
    migration_count: int
    p99_rtt_ms: float
    mean_rtt_ms: float
    pareto: bool = False


class _SweepPoint:
    """One sweep run, picklable for worker processes."""

    def __init__(self, trace: Trace, spec_template: StrategySpec, absolute: bool) -> None:
        self.trace = trace
        self.spec_template = spec_template
        self.absolute = absolute

    def __call__(self, threshold: float) -> SweepRow:
        """Run the strategy with the given threshold."""
        spec = self.spec_template.with_threshold(threshold, self.absolute)
        schedule = run_strategy(self.trace, spec)
        report = compute_metrics(self.trace, schedule)
        return SweepRow(
            threshold=threshold,
            absolute=self.absolute,
            migration_count=report.migration_count,
            p99_rtt_ms=report.p99_rtt_ms,
            mean_rtt_ms=report.mean_rtt_ms,
        )


def pareto_front(rows: Sequence[SweepRow]) -> list[SweepRow]:
    """Mark rows not dominated in migrations and p99 RTT.

    A row is dominated if another row is no worse in both and better in one.

    Args:
        rows: Sweep rows

    Returns:
        Rows with the pareto flag set
    """

    def dominates(a: SweepRow, b: SweepRow) -> bool:
        """a is at least as good as b everywhere and better somewhere."""
        return (
            a.migration_count <= b.migration_count
            and a.p99_rtt_ms <= b.p99_rtt_ms
            and (a.migration_count < b.migration_count or a.p99_rtt_ms < b.p99_rtt_ms)
        )

    return [
        replace(row, pareto=not any(dominates(other, row) for other in rows)) for row in rows
    ]


def pareto_sweep(
    trace: Trace,
    thresholds: Sequence[float],
    spec_template: StrategySpec,
    absolute: bool = False,
    workers: int | None = None,
) -> list[SweepRow]:
    """Run a threshold strategy for several thresholds on the same trace.

    Args:
        trace: Trace
        thresholds: tau values, or delta values in ms if absolute
        spec_template: Provides aggregation and cardinality
        absolute: Sweep delta instead of tau
        workers: Number of worker processes, defaults to the config profile

    Returns:
        Rows sorted by threshold with the Pareto front marked
    """
    if not thresholds:
        raise ValueError("A sweep needs at least one threshold")
    workers = CONFIG.workers if workers is None else workers
    thresholds = sorted(thresholds)
    point = _SweepPoint(trace, spec_template, absolute)

    if workers > 1 and len(thresholds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(point, thresholds))
    else:
        rows = [point(threshold) for threshold in thresholds]
    return pareto_front(rows)


def sweep_table(rows: Sequence[SweepRow]) -> pd.DataFrame:
    """Sweep rows as table."""
    return pd.DataFrame(
        [
            {
                "threshold": row.threshold,
                "unit": "ms" if row.absolute else "fraction",
                "migration_count": row.migration_count,
                "p99_rtt_ms": row.p99_rtt_ms,
                "mean_rtt_ms": row.mean_rtt_ms,
                "pareto": row.pareto,
            }
            for row in rows
        ],
        columns=SWEEP_COLUMNS,
    )


def scenario_strategies(config: ScenarioConfig) -> list[StrategySpec]:
    """Strategies defined by a scenario."""
    return [StrategySpec.from_dict(entry, config.cardinality) for entry in config.strategies]


def run_schedule_pipeline(
    trace: Trace,
    spec: StrategySpec,
    cost_model: CostModel,
    lead_time_s: float,
    payload_mb: float,
    out_dir: Path | None = None,
) -> MetricsReport:
    """Schedule, plan, check and measure a strategy on a trace.

    Args:
        trace: Trace
        spec: Strategy
        cost_model: Migration cost model
        lead_time_s: Replication lead time
        payload_mb: Replicated state
        out_dir: Directory for the schedule, timeline, violations and commands, nothing is
            written if None

    Returns:
        Metrics of the strategy
    """
    schedule = run_strategy(trace, spec)
    timeline, commands = plan_timeline(schedule, lead_time_s, cost_model, payload_mb)
    violations = check_zero_downtime(timeline, schedule, trace)

    if out_dir is not None:
        out_dir = pathlib.Path(out_dir)
        write_schedule(schedule, out_dir)
        write_timeline(timeline, out_dir / "timeline.csv")
        write_violations(violations, out_dir / "violations.csv")
        write_command_log(commands, out_dir / "commands.csv")

    return compute_metrics(trace, schedule, timeline, cost_model, payload_mb)


def run_scenario(
    config: ScenarioConfig,
    out_dir: Path,
    strategies: Sequence[StrategySpec] | None = None,
    cost_model: CostModel | None = None,
    lead_time_s: float | None = None,
    payload_mb: float | None = None,
    workers: int | None = None,
) -> list[MetricsReport]:
    """Generate the trace of a scenario and run its strategies.

    Args:
        config: Scenario
        out_dir: Output directory, one subdirectory per strategy
        strategies: Strategies, defaults to the scenario's
        cost_model: Cost model, defaults to the decoupled model of the config profile
        lead_time_s: Replication lead time, defaults to the config profile
        payload_mb: Replicated state, defaults to the config profile
        workers: Number of worker processes for the trace

    Returns:
        Metrics per strategy
    """
    out_dir = pathlib.Path(out_dir)
    strategies = scenario_strategies(config) if strategies is None else strategies
    cost_model = CostModel.from_config("decoupled") if cost_model is None else cost_model
    lead_time_s = CONFIG.lead_time_s if lead_time_s is None else lead_time_s
    payload_mb = CONFIG.payload_mb if payload_mb is None else payload_mb

    trace = generate_trace(config, workers=workers)
    write_trace(trace, out_dir / "trace.csv")

    reports = [
        run_schedule_pipeline(
            trace, spec, cost_model, lead_time_s, payload_mb, out_dir / spec.name
        )
        for spec in strategies
    ]
    write_metrics(reports, out_dir)
    return reports
