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
"""Test migration costs, timelines and the zero-downtime check."""

import numpy as np
import pytest

from leoedgesim.lifecycle import (
    COMMANDS_COLUMNS,
    TIMELINE_COLUMNS,
    CommandAction,
    CostMode,
    CostModel,
    DowntimeCause,
    check_zero_downtime,
    cost_curve,
    downtime_fraction,
    migration_cost,
    phase_breakdown,
    plan_timeline,
    write_command_log,
    write_timeline,
    write_violations,
)
from leoedgesim.orbits import DomainError
from leoedgesim.strategies import MigrationEvent, Schedule, StrategySpec
from leoedgesim.utils.csv_io import read_csv_table

from .trace_builder import dense_trace

NAN = np.nan


@pytest.fixture(name="container")
def fixture_container():
    """Container snapshot cost model of the default profile."""
    return CostModel.from_config("container")


@pytest.fixture(name="decoupled")
def fixture_decoupled():
    """Decoupled state cost model of the default profile."""
    return CostModel.from_config("decoupled")


@pytest.mark.parametrize(
    "name, payload_mb, expected",
    [
        ("container", 0.0, 3.82),
        ("container", 1000.0, 35.70),
        ("decoupled", 0.0, 0.131),
        ("decoupled", 1000.0, 0.931),
    ],
)
def test_migration_cost(name, payload_mb, expected):
    """Test the cost model endpoints."""
    assert migration_cost(CostModel.from_config(name), payload_mb) == pytest.approx(expected)


def test_negative_payload(container):
    """Test payload check."""
    with pytest.raises(DomainError, match="Payload"):
        migration_cost(container, -1.0)


def test_unknown_cost_model():
    """Test unknown cost model names."""
    with pytest.raises(KeyError, match="container, decoupled"):
        CostModel.from_config("teleport")


def test_container_phases(container, decoupled):
    """Test that the phases sum to the migration cost."""
    phases = phase_breakdown(container, 100.0)
    assert set(phases) == {"checkpoint", "transfer", "restore"}
    assert sum(phases.values()) == pytest.approx(migration_cost(container, 100.0))
    assert phases["restore"] == pytest.approx(3.39)

    phases = phase_breakdown(decoupled, 100.0)
    assert phases == pytest.approx({"instantiate": 0.131, "replicate": 0.08})


def test_container_split():
    """Test the container phase split checks."""
    default_split = CostModel(mode="container_snapshot", base_s=2.0, per_mb_s=0.0)
    assert default_split.transfer_base_s == 2.0
    assert default_split.mode == CostMode.CONTAINER_SNAPSHOT

    with pytest.raises(DomainError, match="phases sum"):
        CostModel(
            mode="container_snapshot",
            base_s=2.0,
            per_mb_s=0.0,
            checkpoint_s=1.0,
            transfer_base_s=1.0,
            restore_s=1.0,
        )
    with pytest.raises(DomainError, match="non-negative"):
        CostModel(mode="decoupled_state", base_s=-1.0, per_mb_s=0.0)


def test_cost_curve(container, decoupled):
    """Test the cost table over payload."""
    table = cost_curve({"container": container, "decoupled": decoupled})
    assert table.columns.tolist() == ["payload_mb", "container_s", "decoupled_s"]
    assert table["payload_mb"].tolist() == list(range(0, 1001, 100))
    assert table["container_s"].iloc[-1] == pytest.approx(35.70)
    assert table["decoupled_s"].is_monotonic_increasing


def test_downtime_fraction(container, decoupled):
    """Test downtime shares of both mechanisms."""
    downtime = downtime_fraction(container, 1000.0, 260.5)
    assert downtime.fraction == pytest.approx(0.137, abs=1e-3)
    assert not downtime.infeasible

    assert downtime_fraction(decoupled, 0.0, 27.88).fraction == 0.0

    downtime = downtime_fraction(container, 1000.0, 27.88)
    assert downtime == (1.0, True)

    with pytest.raises(DomainError, match="period"):
        downtime_fraction(container, 0.0, 0.0)


def single_handoff_schedule(handoff_s=30, duration_s=60):
    """One client moving from satellite 0 to 1."""
    times = np.arange(duration_s)
    sats = np.where(times < handoff_s, 0, 1)
    return Schedule(
        StrategySpec(kind="minmax"),
        ["a"],
        times,
        sats[:, np.newaxis],
        [frozenset({int(sat)}) for sat in sats],
        [
            MigrationEvent(0, None, 0, frozenset({"a"})),
            MigrationEvent(handoff_s, 0, 1, frozenset({"a"})),
        ],
    )


def flat_cost(cost_s):
    """Payload-independent cost model."""
    return CostModel(mode="decoupled_state", base_s=cost_s, per_mb_s=0.0)


def test_plan_timeline():
    """Test replication start, readiness and teardown."""
    timeline, _ = plan_timeline(single_handoff_schedule(), lead_time_s=5.0, model=flat_cost(10.0))

    (entry,) = timeline.entries
    assert (entry.replicate_start_s, entry.handoff_s, entry.teardown_s) == (25.0, 30, 30)
    assert (entry.from_sat, entry.to_sat) == (0, 1)
    assert not entry.ready
    assert entry.ready_at_s == 35.0
    assert timeline.unready == [entry]
    assert timeline.overlap_fraction == pytest.approx(5.0 / 60.0)
    assert timeline.to_table().columns.tolist() == TIMELINE_COLUMNS


def test_plan_timeline_clamps_to_start():
    """Test that replication can not start before the schedule."""
    timeline, _ = plan_timeline(
        single_handoff_schedule(handoff_s=3), lead_time_s=20.0, model=flat_cost(1.0)
    )
    assert timeline.entries[0].replicate_start_s == 0.0
    assert timeline.entries[0].ready


def test_negative_lead_time():
    """Test lead time check."""
    with pytest.raises(DomainError, match="Lead time"):
        plan_timeline(single_handoff_schedule(), lead_time_s=-1.0, model=flat_cost(1.0))


def test_command_log():
    """Test scheduler commands of a single hand-off."""
    _, log = plan_timeline(single_handoff_schedule(), lead_time_s=5.0, model=flat_cost(1.0))
    assert [(c.t, c.action.value, c.sat) for c in log.commands] == [
        (0, "deploy", 0),
        (0, "notify", 0),
        (25.0, "deploy", 1),
        (30, "notify", 1),
        (30, "remove", 0),
        (60, "remove", 1),
    ]
    assert len(log.of(CommandAction.NOTIFY)) == 2
    assert log.of(CommandAction.NOTIFY)[1].clients == {"a"}


def test_replicated_teardown():
    """Test that a replicated source is removed when it stops serving."""
    spec = StrategySpec(kind="minmax", cardinality="many_to_many")
    schedule = Schedule(
        spec,
        ["c0", "c1"],
        np.arange(5),
        [[0, 0], [0, 0], [0, 1], [0, 1], [1, 1]],
        [frozenset({0}), frozenset({0}), frozenset({0, 1}), frozenset({0, 1}), frozenset({1})],
        [
            MigrationEvent(0, None, 0, frozenset({"c0", "c1"}), replication_source=-1),
            MigrationEvent(2, 0, 1, frozenset({"c1"}), replication_source=0),
        ],
    )
    timeline, log = plan_timeline(schedule, lead_time_s=1.0, model=flat_cost(0.5))

    (entry,) = timeline.entries
    assert (entry.replicate_start_s, entry.handoff_s, entry.teardown_s) == (1.0, 2, 4)
    assert [(c.t, c.sat) for c in log.of(CommandAction.REMOVE)] == [(4, 0), (5, 1)]
    assert [(c.t, c.sat) for c in log.of(CommandAction.DEPLOY)] == [(0, 0), (1.0, 1)]


@pytest.mark.parametrize("lead_time_s, unready", [(5.0, 5), (10.0, 0), (20.0, 0)])
def test_zero_downtime(lead_time_s, unready):
    """Test unready seconds for a migration cost of 10 s."""
    schedule = single_handoff_schedule()
    trace = dense_trace(np.ones((60, 1, 2)), clients=["a"])
    timeline, _ = plan_timeline(schedule, lead_time_s=lead_time_s, model=flat_cost(10.0))

    report = check_zero_downtime(timeline, schedule, trace)
    assert [v.t for v in report.of(DowntimeCause.UNREADY_REPLICA)] == list(range(30, 30 + unready))
    assert report.zero_downtime is (unready == 0)


def test_zero_downtime_coverage_gap():
    """Test that coverage gaps are violations of their own cause."""
    schedule = single_handoff_schedule()
    latency_ms = np.ones((60, 1, 2))
    latency_ms[10:12] = NAN
    trace = dense_trace(latency_ms, clients=["a"])
    timeline, _ = plan_timeline(schedule, lead_time_s=20.0, model=flat_cost(1.0))

    report = check_zero_downtime(timeline, schedule, trace)
    assert report.violations == [
        (10, "a", DowntimeCause.COVERAGE_GAP),
        (11, "a", DowntimeCause.COVERAGE_GAP),
    ]


def test_only_handed_off_clients_are_unready():
    """Test that clients already served by the target satellite stay ready."""
    times = np.arange(10)
    assignment = np.array([[0, 1]] * 5 + [[1, 1]] * 5)
    schedule = Schedule(
        StrategySpec(kind="minmax"),
        ["a", "b"],
        times,
        assignment,
        [frozenset(row.tolist()) for row in assignment],
        [
            MigrationEvent(0, None, 0, frozenset({"a"})),
            MigrationEvent(0, None, 1, frozenset({"b"})),
            MigrationEvent(5, 0, 1, frozenset({"a"})),
        ],
    )
    trace = dense_trace(np.ones((10, 2, 2)), clients=["a", "b"])
    timeline, _ = plan_timeline(schedule, lead_time_s=0.0, model=flat_cost(2.0))

    report = check_zero_downtime(timeline, schedule, trace)
    assert report.violations == [
        (5, "a", DowntimeCause.UNREADY_REPLICA),
        (6, "a", DowntimeCause.UNREADY_REPLICA),
    ]


def test_write_lifecycle_tables(tmp_path):
    """Test the lifecycle CSV files."""
    schedule = single_handoff_schedule()
    trace = dense_trace(np.ones((60, 1, 2)), clients=["a"])
    timeline, log = plan_timeline(schedule, lead_time_s=5.0, model=flat_cost(10.0))
    report = check_zero_downtime(timeline, schedule, trace)

    write_timeline(timeline, tmp_path / "timeline.csv")
    write_violations(report, tmp_path / "violations.csv")
    write_command_log(log, tmp_path / "commands.csv")

    commands = read_csv_table(
        tmp_path / "commands.csv",
        dict(zip(COMMANDS_COLUMNS, (float, str, int, str))),
        may_be_empty=("clients",),
    )
    assert commands["command"].tolist() == [
        "deploy",
        "notify",
        "deploy",
        "notify",
        "remove",
        "remove",
    ]
    violations = read_csv_table(
        tmp_path / "violations.csv", {"t_s": int, "site_id": str, "cause": str}
    )
    assert violations["cause"].unique().tolist() == ["unready_replica"]
    assert (tmp_path / "timeline.csv").read_text().startswith(",".join(TIMELINE_COLUMNS))
