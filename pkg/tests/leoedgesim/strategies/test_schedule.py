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
"""Test strategy specifications and schedule io."""

import numpy as np
import pytest

from leoedgesim.strategies import run_strategy
from leoedgesim.strategies.schedule import (
    Aggregation,
    Cardinality,
    MigrationEvent,
    Schedule,
    StrategyKind,
    StrategySpec,
    read_schedule,
    schedule_table,
    write_schedule,
)

from ..trace_builder import dense_trace

NAN = np.nan


@pytest.mark.parametrize(
    "parameters, match",
    [
        ({"kind": "threshold"}, "exactly one"),
        ({"kind": "threshold", "tau": 0.1, "delta_ms": 1.0}, "exactly one"),
        ({"kind": "minmax", "tau": 0.1}, "takes no threshold"),
        ({"kind": "threshold", "tau": 1.5}, "outside"),
        ({"kind": "threshold", "delta_ms": 0.0}, "positive"),
        ({"kind": "sticky", "cardinality": "many_to_many"}, "Sticky"),
    ],
)
def test_invalid_strategy(parameters, match):
    """Test strategy invariants."""
    with pytest.raises(ValueError, match=match):
        StrategySpec(**parameters)


def test_strategy_names():
    """Test derived names and labels."""
    assert StrategySpec(kind="minmax").name == "minmax"
    assert StrategySpec(kind="threshold", tau=0.1).name == "threshold-10%"
    assert StrategySpec(kind="threshold", delta_ms=1.0).name == "threshold-1ms"
    assert StrategySpec(kind="sticky", label="sticky-rms").name == "sticky-rms"


def test_strategy_from_dict():
    """Test scenario entries and enum coercion."""
    spec = StrategySpec.from_dict({"kind": "sticky", "aggregation": "rms"}, "many_to_one")
    assert spec.kind == StrategyKind.STICKY
    assert spec.aggregation == Aggregation.RMS
    assert spec.cardinality == Cardinality.MANY_TO_ONE
    assert spec.to_dict()["aggregation"] == "rms"
    assert StrategySpec(**spec.to_dict()) == spec


def test_with_threshold():
    """Test threshold variants used by sweeps."""
    spec = StrategySpec(kind="minmax", aggregation="rms", cardinality="many_to_one", label="x")
    relative = spec.with_threshold(0.25)
    assert (relative.kind, relative.tau, relative.delta_ms) == (StrategyKind.THRESHOLD, 0.25, None)
    assert relative.label is None
    absolute = spec.with_threshold(2.0, absolute=True)
    assert (absolute.tau, absolute.delta_ms) == (None, 2.0)
    assert absolute.cardinality == Cardinality.MANY_TO_ONE


@pytest.mark.parametrize(
    "flag, expected",
    [
        ("1:1", Cardinality.ONE_TO_ONE),
        ("n:1", Cardinality.MANY_TO_ONE),
        ("n:m", Cardinality.MANY_TO_MANY),
        ("many_to_many", Cardinality.MANY_TO_MANY),
    ],
)
def test_cardinality_flags(flag, expected):
    """Test short cardinality flags."""
    assert Cardinality.from_flag(flag) == expected


def test_event_invariants():
    """Test that hand-offs need two distinct satellites."""
    assert MigrationEvent(0, None, 3).bootstrap
    with pytest.raises(ValueError, match="to itself"):
        MigrationEvent(5, 3, 3)


def test_schedule_replica_invariant():
    """Test that every assigned satellite hosts a replica."""
    spec = StrategySpec(kind="minmax")
    with pytest.raises(ValueError, match="host no replica"):
        Schedule(spec, ["a"], [0, 1], [[1], [2]], [frozenset({1}), frozenset({1})])


def test_schedule_accessors():
    """Test serving satellites and derived values."""
    spec = StrategySpec(kind="minmax")
    schedule = Schedule(
        spec,
        ["a", "b"],
        [0, 2, 4],
        [[1, -1], [1, 2], [3, 3]],
        [frozenset({1}), frozenset({1, 2}), frozenset({3})],
        [
            MigrationEvent(0, None, 1, frozenset({"a"})),
            MigrationEvent(4, 1, 3, frozenset({"a"})),
        ],
    )
    assert schedule.serving(2, "b") == 2
    assert schedule.serving(0, "b") is None
    assert schedule.step_s == 2
    assert schedule.duration_s == 6
    assert schedule.migration_count == 1
    assert schedule.replica_counts.tolist() == [1, 2, 1]
    with pytest.raises(KeyError, match="t=3"):
        schedule.serving(3, "a")

    table = schedule_table(schedule)
    assert table.columns.tolist() == ["t_s", "site_id", "serving_sat"]
    assert table.values.tolist()[:2] == [[0, "a", 1], [0, "b", -1]]


@pytest.mark.parametrize(
    "spec",
    [
        StrategySpec(kind="threshold", tau=0.1),
        StrategySpec(kind="sticky", aggregation="rms", cardinality="many_to_one"),
        StrategySpec(kind="threshold", delta_ms=0.5, cardinality="many_to_many"),
    ],
)
def test_schedule_roundtrip(tmp_path, spec):
    """Test that written schedules read back equal."""
    trace = dense_trace(
        [
            [[NAN, NAN, NAN], [NAN, NAN, NAN]],
            [[1.0, 2.0, 3.0], [3.0, 2.0, 1.0]],
            [[2.0, 1.0, 3.0], [NAN, NAN, NAN]],
            [[3.0, 1.0, 1.0], [1.0, 1.0, 3.0]],
        ]
    )
    schedule = run_strategy(trace, spec, handoff_delay=lambda step_index, a, b: abs(a - b))

    write_schedule(schedule, tmp_path)
    assert {path.name for path in tmp_path.iterdir()} == {
        "schedule.csv",
        "events.csv",
        "replicas.csv",
        "strategy.yaml",
    }
    assert read_schedule(tmp_path) == schedule
