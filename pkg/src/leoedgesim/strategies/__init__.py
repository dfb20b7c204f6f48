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
"""Server selection strategies.

A strategy turns a trace into a schedule: the serving satellite of every client at every
timestep and the resulting migrations.
"""

from __future__ import annotations

import numpy as np
from loguru import logger

from leoedgesim.strategies.hitting_set import select_many_to_many
from leoedgesim.strategies.schedule import (
    NO_SATELLITE,
    ORIGIN,
    Aggregation,
    Cardinality,
    MigrationEvent,
    Schedule,
    StrategyKind,
    StrategySpec,
    read_schedule,
    write_schedule,
)
from leoedgesim.strategies.scoring import HandoffDelay, handoff_delay_function, score_series
from leoedgesim.strategies.sticky import candidate_bands, select_sticky
from leoedgesim.strategies.threshold import select_minmax, select_threshold
from leoedgesim.traces import Trace
from leoedgesim.utils.type_hinting import FlatId, IntArray

__all__ = [
    "Aggregation",
    "Cardinality",
    "MigrationEvent",
    "Schedule",
    "StrategyKind",
    "StrategySpec",
    "NO_SATELLITE",
    "ORIGIN",
    "read_schedule",
    "run_strategy",
    "write_schedule",
]


def _serve_single_service(
    trace: Trace,
    client_indices: IntArray,
    spec: StrategySpec,
    handoff_delay: HandoffDelay,
) -> tuple[IntArray, list[MigrationEvent]]:
    """Serving satellite of one service instance at every timestep.

    Args:
        trace: Trace
        client_indices: Clients of the service
        spec: Strategy
        handoff_delay: Delay between satellites

    Returns:
        Serving satellite per timestep (NO_SATELLITE before bootstrap) and the migrations
    """
    series = score_series(trace, client_indices, spec.aggregation)
    bands = (
        candidate_bands(series, spec.sticky_margin) if spec.kind == StrategyKind.STICKY else None
    )
    affected = frozenset(trace.clients[i] for i in client_indices)

    serving = np.full(len(trace.times), NO_SATELLITE, dtype=np.int64)
    migrations: list[MigrationEvent] = []
    current: FlatId | None = None

    for step_index, t in enumerate(trace.times.tolist()):
        scores = series[step_index]

        match spec.kind:
            case StrategyKind.MINMAX:
                selected = select_minmax(scores)
                selected = current if selected is None else selected
            case StrategyKind.THRESHOLD:
                selected = select_threshold(scores, current, spec, t)
            case StrategyKind.STICKY:
                assert bands is not None
                if current is not None and bands[step_index, current]:
                    selected = current
                else:
                    selected = select_sticky(bands, step_index, current, handoff_delay)

        if np.all(np.isnan(scores)):
            logger.debug(f"t={t}: coverage gap for {', '.join(sorted(affected))}")

        if selected is not None and selected != current:
            migrations.append(MigrationEvent(t, current, selected, affected))
            current = selected
        if current is not None:
            serving[step_index] = current

    return serving, migrations


def _run_one_service_per_group(
    trace: Trace, spec: StrategySpec, groups: list[IntArray], handoff_delay: HandoffDelay
) -> Schedule:
    """Run an independent service per client group."""
    serving = np.full((len(trace.times), trace.n_clients), NO_SATELLITE, dtype=np.int64)
    migrations: list[MigrationEvent] = []
    for group in groups:
        group_serving, group_migrations = _serve_single_service(
            trace, group, spec, handoff_delay
        )
        serving[:, group] = group_serving[:, np.newaxis]
        migrations.extend(group_migrations)

    # Clients are only assigned where they reach their serving satellite
    assignment = np.full_like(serving, NO_SATELLITE)
    clients = np.arange(trace.n_clients)
    for step_index, frame in enumerate(trace.frames()):
        sats = serving[step_index]
        has_server = sats != NO_SATELLITE
        reachable = np.zeros(trace.n_clients, dtype=bool)
        reachable[has_server] = ~np.isnan(
            frame.latency_ms[clients[has_server], sats[has_server]]
        )
        assignment[step_index, reachable] = sats[reachable]

    replicas = [
        frozenset(int(sat) for sat in row if sat != NO_SATELLITE) for row in serving
    ]
    migrations.sort(key=lambda event: (event.t_handoff, min(event.affected_clients)))
    return Schedule(spec, list(trace.clients), trace.times, assignment, replicas, migrations)


def _run_many_to_many(trace: Trace, spec: StrategySpec, handoff_delay: HandoffDelay) -> Schedule:
    """Replicated service with per-client assignment."""
    # MinMax places a replica at every client's nearest satellite
    tau = 0.0 if spec.kind == StrategyKind.MINMAX else spec.tau

    assignment = np.full((len(trace.times), trace.n_clients), NO_SATELLITE, dtype=np.int64)
    replicas: list[frozenset[FlatId]] = []
    migrations: list[MigrationEvent] = []
    current: frozenset[FlatId] = frozenset()

    for step_index, frame in enumerate(trace.frames()):
        if not np.any(frame.covered):
            logger.debug(f"t={frame.t}: total coverage gap, keeping {len(current)} replica(s)")
            replicas.append(current)
            continue

        selection = select_many_to_many(
            frame.latency_ms,
            current,
            tau,
            spec.delta_ms,
            lambda a, b, step_index=step_index: handoff_delay(step_index, a, b),
        )
        for sat, source in selection.sources.items():
            migrations.append(
                MigrationEvent(
                    t_handoff=frame.t,
                    from_sat=None if source == ORIGIN else source,
                    to_sat=sat,
                    affected_clients=frozenset(
                        trace.clients[i] for i in np.flatnonzero(selection.assignment == sat)
                    ),
                    replication_source=source,
                )
            )
        assignment[step_index] = selection.assignment
        replicas.append(selection.replicas)
        current = selection.replicas

    return Schedule(spec, list(trace.clients), trace.times, assignment, replicas, migrations)


def run_strategy(
    trace: Trace, spec: StrategySpec, handoff_delay: HandoffDelay | None = None
) -> Schedule:
    """Run a strategy over a trace.

    Timesteps are processed in order. The first covered timestep bootstraps the service, every
    later change of a serving satellite or a new replica is a migration.

    Args:
        trace: Trace
        spec: Strategy
        handoff_delay: Delay between satellites, defaults to ISL delays if the trace knows
            its scenario

    Returns:
        Schedule
    """
    handoff_delay = handoff_delay or handoff_delay_function(trace)

    match spec.cardinality:
        case Cardinality.ONE_TO_ONE:
            groups = [np.array([i]) for i in range(trace.n_clients)]
            schedule = _run_one_service_per_group(trace, spec, groups, handoff_delay)
        case Cardinality.MANY_TO_ONE:
            groups = [np.arange(trace.n_clients)] if trace.n_clients else []
            schedule = _run_one_service_per_group(trace, spec, groups, handoff_delay)
        case Cardinality.MANY_TO_MANY:
            schedule = _run_many_to_many(trace, spec, handoff_delay)

    logger.info(schedule)
    return schedule
