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
"""Proactive migration lifecycle.

A hand-off at t_h is prepared by replicating the service to the new satellite lead_time_s in
advance. The replica is ready once the migration cost has elapsed. The old replica is torn
down at the hand-off, or for replicated services when it stops serving any client.
"""

from __future__ import annotations

import bisect
import enum
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import pandas as pd
from loguru import logger

from leoedgesim import CONFIG
from leoedgesim.orbits import DomainError
from leoedgesim.strategies import NO_SATELLITE, Cardinality, Schedule
from leoedgesim.traces import Trace
from leoedgesim.utils.csv_io import write_csv_table
from leoedgesim.utils.type_hinting import FlatId, Path

TIMELINE_COLUMNS = [
    "replicate_start_s",
    "handoff_s",
    "teardown_s",
    "from_sat",
    "to_sat",
    "payload_mb",
    "ready",
]
VIOLATIONS_COLUMNS = ["t_s", "site_id", "cause"]
COMMANDS_COLUMNS = ["t_s", "command", "sat", "clients"]


class CostMode(str, enum.Enum):
    """Migration mechanism."""

    DECOUPLED_STATE = "decoupled_state"
    CONTAINER_SNAPSHOT = "container_snapshot"


@dataclass(frozen=True)
class CostModel:
    """Linear migration cost model.

    Attributes:
        mode: Migration mechanism
        base_s: Migration time without payload
        per_mb_s: Additional seconds per megabyte of payload
        checkpoint_s: Container checkpoint time, part of base_s
        transfer_base_s: Container transfer time without payload, part of base_s
        restore_s: Container restore time, part of base_s
    """

    mode: CostMode
    base_s: float
    per_mb_s: float
    checkpoint_s: float | None = None
    transfer_base_s: float | None = None
    restore_s: float | None = None

    def __post_init__(self) -> None:
        """Check invariants."""
        object.__setattr__(self, "mode", CostMode(self.mode))
        if self.base_s < 0 or self.per_mb_s < 0:
            raise DomainError(
                f"Cost model parameters have to be non-negative, got {self.base_s} and "
                f"{self.per_mb_s}"
            )

        phases = (self.checkpoint_s, self.transfer_base_s, self.restore_s)
        if self.mode == CostMode.CONTAINER_SNAPSHOT:
            if any(phase is None for phase in phases):
                # Without a split, the whole base is attributed to the transfer
                object.__setattr__(self, "checkpoint_s", 0.0)
                object.__setattr__(self, "transfer_base_s", self.base_s)
                object.__setattr__(self, "restore_s", 0.0)
            elif not math.isclose(sum(phases), self.base_s, abs_tol=1e-9):  # type: ignore[arg-type]
                raise DomainError(
                    f"Container phases sum to {sum(phases)} s "  # type: ignore[arg-type]
                    f"instead of {self.base_s} s"
                )

    @classmethod
    def from_config(cls, name: str) -> CostModel:
        """Cost model of the active config profile.

        Args:
            name: Cost model name, e.g. 'container' or 'decoupled'

        Returns:
            Cost model
        """
        if name not in CONFIG.cost_models:
            raise KeyError(
                f"Cost model '{name}' unknown. Known cost models are: "
                f"{', '.join(CONFIG.cost_models)}"
            )
        return cls(**CONFIG.cost_models[name])


def migration_cost(model: CostModel, payload_mb: float) -> float:
    """Migration time.

    Args:
        model: Cost model
        payload_mb: Replicated state

    Returns:
        Seconds from replication start until the new replica is ready
    """
    if payload_mb < 0:
        raise DomainError(f"Payload has to be non-negative, got {payload_mb} MB")
    return model.base_s + model.per_mb_s * payload_mb


def phase_breakdown(model: CostModel, payload_mb: float) -> dict[str, float]:
    """Migration time per phase.

    Container migrations are split into checkpoint, transfer and restore, the payload is
    attributed to the transfer. Decoupled migrations instantiate the function and replicate
    the data.

    Args:
        model: Cost model
        payload_mb: Replicated state

    Returns:
        Seconds per phase, summing to the migration cost
    """
    transfer_s = migration_cost(model, payload_mb) - model.base_s
    match model.mode:
        case CostMode.CONTAINER_SNAPSHOT:
            return {
                "checkpoint": model.checkpoint_s,  # type: ignore[dict-item]
                "transfer": model.transfer_base_s + transfer_s,  # type: ignore[operator]
                "restore": model.restore_s,  # type: ignore[dict-item]
            }
        case CostMode.DECOUPLED_STATE:
            return {"instantiate": model.base_s, "replicate": transfer_s}


def cost_curve(
    models: Mapping[str, CostModel], payloads_mb: Sequence[float] | None = None
) -> pd.DataFrame:
    """Migration time over payload for several models.

    Args:
        models: Cost models by name
        payloads_mb: Payloads, defaults to 0 to 1000 MB in 100 MB steps

    Returns:
        Table with column payload_mb and one '<name>_s' column per model
    """
    payloads_mb = list(range(0, 1001, 100)) if payloads_mb is None else list(payloads_mb)
    table = pd.DataFrame({"payload_mb": payloads_mb})
    for name, model in models.items():
        table[f"{name}_s"] = [migration_cost(model, payload) for payload in payloads_mb]
    return table


class Downtime(NamedTuple):
    """Service downtime share.

    Attributes:
        fraction: Share of time the service is down, at most 1
        infeasible: The migration takes longer than the hand-off period
    """

    fraction: float
    infeasible: bool


def downtime_fraction(model: CostModel, payload_mb: float, handoff_period_s: float) -> Downtime:
    """Downtime caused by periodic migrations.

    Container snapshots stop the service during checkpoint, transfer and restore. Decoupled
    state is replicated while the old instance keeps serving.

    Args:
        model: Cost model
        payload_mb: Replicated state
        handoff_period_s: Time between hand-offs

    Returns:
        Downtime share and whether the cadence is infeasible
    """
    if handoff_period_s <= 0:
        raise DomainError(f"Hand-off period has to be positive, got {handoff_period_s} s")

    cost = migration_cost(model, payload_mb)
    infeasible = cost > handoff_period_s
    if infeasible:
        logger.warning(
            f"Migration takes {cost:.2f} s but hand-offs happen every {handoff_period_s:.2f} s"
        )

    if model.mode == CostMode.DECOUPLED_STATE:
        return Downtime(0.0, infeasible)
    return Downtime(min(cost / handoff_period_s, 1.0), infeasible)


@dataclass(frozen=True)
class TimelineEntry:
    """Planned migration.

    Attributes:
        replicate_start_s: Start of the proactive replication
        handoff_s: Hand-off time
        teardown_s: Removal of the old replica
        from_sat: Old satellite
        to_sat: New satellite
        payload_mb: Replicated state
        ready: The new replica is ready at the hand-off
        cost_s: Migration time
        affected_clients: Clients handed off
    """

    replicate_start_s: float
    handoff_s: int
    teardown_s: int
    from_sat: FlatId
    to_sat: FlatId
    payload_mb: float
    ready: bool
    cost_s: float
    affected_clients: frozenset[str] = frozenset()

    @property
    def ready_at_s(self) -> float:
        """Time the new replica is ready."""
        return self.replicate_start_s + self.cost_s


@dataclass
class MigrationTimeline:
    """Schedule expanded by replication and teardown.

    Attributes:
        entries: Planned migrations in hand-off order
        lead_time_s: Replication lead time
        duration_s: Duration of the schedule
        overlap_fraction: Share of time two replicas of a service coexist for a hand-off
    """

    entries: list[TimelineEntry]
    lead_time_s: float
    duration_s: int
    overlap_fraction: float

    @property
    def unready(self) -> list[TimelineEntry]:
        """Entries whose replica is not ready at the hand-off."""
        return [entry for entry in self.entries if not entry.ready]

    def to_table(self) -> pd.DataFrame:
        """Timeline as table."""
        return pd.DataFrame(
            [{name: getattr(entry, name) for name in TIMELINE_COLUMNS} for entry in self.entries],
            columns=TIMELINE_COLUMNS,
        )


class CommandAction(str, enum.Enum):
    """Scheduler command, the order is the order within a timestep."""

    DEPLOY = "deploy"
    NOTIFY = "notify"
    REMOVE = "remove"

    @property
    def rank(self) -> int:
        """Position within a timestep."""
        return list(CommandAction).index(self)


@dataclass(frozen=True)
class Command:
    """Scheduler command.

    Attributes:
        t: Execution time
        action: Command
        sat: Target satellite
        clients: Notified clients
    """

    t: float
    action: CommandAction
    sat: FlatId
    clients: frozenset[str] = frozenset()


@dataclass
class SchedulerCommandLog:
    """Commands of the central scheduler.

    Attributes:
        commands: Commands ordered by time and deploy < notify < remove
    """

    commands: list[Command] = field(default_factory=list)

    def __post_init__(self) -> None:
        """Order commands."""
        self.commands.sort(key=lambda command: (command.t, command.action.rank, command.sat))

    def __len__(self) -> int:
        """Number of commands."""
        return len(self.commands)

    def of(self, action: CommandAction) -> list[Command]:
        """Commands of one kind."""
        return [command for command in self.commands if command.action == action]

    def to_table(self) -> pd.DataFrame:
        """Command log as table."""
        return pd.DataFrame(
            [
                {
                    "t_s": command.t,
                    "command": command.action.value,
                    "sat": command.sat,
                    "clients": ";".join(sorted(command.clients)),
                }
                for command in self.commands
            ],
            columns=COMMANDS_COLUMNS,
        )


def _incarnations(schedule: Schedule) -> list[tuple[FlatId, int, int]]:
    """Replica lifetimes (satellite, first timestep, end time) from replica-set changes."""
    incarnations = []
    started: dict[FlatId, int] = {}
    previous: frozenset[FlatId] = frozenset()
    for t, replicas in zip(schedule.times.tolist(), schedule.replicas):
        for sat in replicas - previous:
            started[sat] = t
        for sat in previous - replicas:
            incarnations.append((sat, started.pop(sat), t))
        previous = replicas
    incarnations.extend((sat, t, schedule.duration_s) for sat, t in started.items())
    return sorted(incarnations, key=lambda incarnation: (incarnation[1], incarnation[0]))


def _teardown(schedule: Schedule, from_sat: FlatId, handoff: int) -> int:
    """Time a replicated service's source replica leaves the replica set."""
    start = int(np.searchsorted(schedule.times, handoff))
    for t, replicas in zip(schedule.times[start:].tolist(), schedule.replicas[start:]):
        if from_sat not in replicas:
            return t
    return schedule.duration_s


def plan_timeline(
    schedule: Schedule,
    lead_time_s: float,
    model: CostModel,
    payload_mb: float = 0.0,
) -> tuple[MigrationTimeline, SchedulerCommandLog]:
    """Expand a schedule into a proactive migration timeline.

    Args:
        schedule: Schedule
        lead_time_s: Seconds replication starts before a hand-off
        model: Cost model
        payload_mb: Replicated state

    Returns:
        Timeline and the scheduler commands
    """
    if lead_time_s < 0:
        raise DomainError(f"Lead time has to be non-negative, got {lead_time_s} s")

    cost = migration_cost(model, payload_mb)
    start = int(schedule.times[0]) if len(schedule.times) else 0
    replicated = schedule.spec.cardinality == Cardinality.MANY_TO_MANY

    entries = []
    for event in schedule.handoffs:
        replicate_start = max(float(start), event.t_handoff - lead_time_s)
        entries.append(
            TimelineEntry(
                replicate_start_s=replicate_start,
                handoff_s=event.t_handoff,
                teardown_s=(
                    _teardown(schedule, event.from_sat, event.t_handoff)  # type: ignore[arg-type]
                    if replicated
                    else event.t_handoff
                ),
                from_sat=event.from_sat,  # type: ignore[arg-type]
                to_sat=event.to_sat,
                payload_mb=payload_mb,
                ready=event.t_handoff - replicate_start >= cost,
                cost_s=cost,
                affected_clients=event.affected_clients,
            )
        )

    for previous, entry in zip(entries[:-1], entries[1:]):
        if (
            previous.affected_clients & entry.affected_clients
            and entry.replicate_start_s < previous.handoff_s
        ):
            logger.warning(
                f"Replication for the hand-off at t={entry.handoff_s} starts before the "
                f"hand-off at t={previous.handoff_s}, migrations are more frequent than the "
                "lead time"
            )

    duration = schedule.duration_s - start
    overlap = sum(entry.handoff_s - entry.replicate_start_s for entry in entries)
    timeline = MigrationTimeline(
        entries=entries,
        lead_time_s=lead_time_s,
        duration_s=duration,
        overlap_fraction=overlap / duration if duration > 0 else 0.0,
    )
    if timeline.unready:
        logger.info(
            f"{len(timeline.unready)} of {len(entries)} replicas are not ready at their hand-off"
        )

    # Replicas introduced by a hand-off are deployed at its replication start
    deploy_times = {(entry.to_sat, entry.handoff_s): entry.replicate_start_s for entry in entries}
    commands = []
    for sat, first_t, end_t in _incarnations(schedule):
        deploy_t = deploy_times.get((sat, first_t), first_t)
        commands.append(Command(deploy_t, CommandAction.DEPLOY, sat))
        commands.append(Command(end_t, CommandAction.REMOVE, sat))
    commands.extend(
        Command(event.t_handoff, CommandAction.NOTIFY, event.to_sat, event.affected_clients)
        for event in schedule.migrations
    )
    return timeline, SchedulerCommandLog(commands)


class DowntimeCause(str, enum.Enum):
    """Reason a client is not served by a ready replica."""

    UNREADY_REPLICA = "unready_replica"
    COVERAGE_GAP = "coverage_gap"


class Violation(NamedTuple):
    """Second a client is not served by a ready replica."""

    t: int
    site_id: str
    cause: DowntimeCause


@dataclass
class ZeroDowntimeReport:
    """Result of the zero-downtime check.

    Attributes:
        violations: Violations ordered by time and client
    """

    violations: list[Violation] = field(default_factory=list)

    @property
    def zero_downtime(self) -> bool:
        """No violation at all."""
        return not self.violations

    def of(self, cause: DowntimeCause) -> list[Violation]:
        """Violations with a cause."""
        return [violation for violation in self.violations if violation.cause == cause]

    def to_table(self) -> pd.DataFrame:
        """Violations as table."""
        return pd.DataFrame(
            [
                {"t_s": v.t, "site_id": v.site_id, "cause": v.cause.value}
                for v in self.violations
            ],
            columns=VIOLATIONS_COLUMNS,
        )


def check_zero_downtime(
    timeline: MigrationTimeline, schedule: Schedule, trace: Trace
) -> ZeroDowntimeReport:
    """Check that every client is served by a ready replica at every second.

    The replica of satellite s serving a client at t belongs to the latest hand-off to s at or
    before t. Clients already served by s before that hand-off and replicas placed at
    bootstrap count as ready.

    Args:
        timeline: Timeline of the schedule
        schedule: Schedule
        trace: Trace of the schedule

    Returns:
        Violations
    """
    handoffs: dict[FlatId, list[tuple[int, float, frozenset[str]]]] = {}
    for entry in timeline.entries:
        handoffs.setdefault(entry.to_sat, []).append(
            (entry.handoff_s, entry.ready_at_s, entry.affected_clients)
        )
    for sat_handoffs in handoffs.values():
        sat_handoffs.sort(key=lambda handoff: handoff[0])
    handoff_times = {sat: [handoff[0] for handoff in h] for sat, h in handoffs.items()}

    gaps = trace.gaps()
    violations = []
    for step_index, t in enumerate(schedule.times.tolist()):
        for client_index, site_id in enumerate(schedule.clients):
            sat = int(schedule.assignment[step_index, client_index])
            if sat == NO_SATELLITE or (t, site_id) in gaps:
                violations.append(Violation(t, site_id, DowntimeCause.COVERAGE_GAP))
                continue

            sat_handoffs = handoffs.get(sat, [])
            latest = bisect.bisect_right(handoff_times.get(sat, []), t) - 1
            if (
                latest >= 0
                and t < sat_handoffs[latest][1]
                and site_id in sat_handoffs[latest][2]
            ):
                violations.append(Violation(t, site_id, DowntimeCause.UNREADY_REPLICA))

    report = ZeroDowntimeReport(violations)
    logger.info(
        f"Zero-downtime check: {len(report.of(DowntimeCause.UNREADY_REPLICA))} unready, "
        f"{len(report.of(DowntimeCause.COVERAGE_GAP))} coverage gap sample(s)"
    )
    return report


def write_timeline(timeline: MigrationTimeline, path: Path) -> None:
    """Write the timeline CSV."""
    write_csv_table(timeline.to_table(), path)


def write_violations(report: ZeroDowntimeReport, path: Path) -> None:
    """Write the violations CSV."""
    write_csv_table(report.to_table(), path)


def write_command_log(log: SchedulerCommandLog, path: Path) -> None:
    """Write the scheduler commands CSV."""
    write_csv_table(log.to_table(), path)
