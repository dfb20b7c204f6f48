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
"""Strategy specifications, schedules and their io."""

from __future__ import annotations

import enum
import pathlib
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from leoedgesim.utils.converter import CONVERTER
from leoedgesim.utils.csv_io import read_csv_table, write_csv_table
from leoedgesim.utils.type_hinting import FlatId, IntArray, Path
from leoedgesim.utils.yaml_io import dump_yaml, load_yaml

NO_SATELLITE = -1
ORIGIN = -1

SCHEDULE_COLUMNS = {"t_s": int, "site_id": str, "serving_sat": int}
EVENTS_COLUMNS = {
    "t_handoff_s": int,
    "from_sat": int,
    "to_sat": int,
    "replication_source": int,
    "clients": str,
}
REPLICAS_COLUMNS = {"t_s": int, "replicas": str}


class StrategyKind(str, enum.Enum):
    """Server selection heuristic."""

    MINMAX = "minmax"
    STICKY = "sticky"
    THRESHOLD = "threshold"


class Aggregation(str, enum.Enum):
    """Aggregation of client latencies into a satellite score."""

    MEAN = "mean"
    RMS = "rms"


class Cardinality(str, enum.Enum):
    """Relation between clients and service instances."""

    ONE_TO_ONE = "one_to_one"
    MANY_TO_ONE = "many_to_one"
    MANY_TO_MANY = "many_to_many"

    @classmethod
    def from_flag(cls, flag: str) -> Cardinality:
        """Cardinality from its short form, e.g. 'n:1'."""
        flags = {"1:1": cls.ONE_TO_ONE, "n:1": cls.MANY_TO_ONE, "n:m": cls.MANY_TO_MANY}
        if flag in flags:
            return flags[flag]
        return cls(flag)


@dataclass(frozen=True)
class StrategySpec:
    """Server selection strategy.

    Attributes:
        kind: Heuristic
        tau: Relative switching threshold, only for threshold
        delta_ms: Absolute switching threshold, only for threshold
        aggregation: Latency aggregation over clients
        cardinality: Clients to service instances relation
        sticky_margin: Near-optimal band of sticky relative to the minimum score
        label: Name used in reports
    """

    kind: StrategyKind
    tau: float | None = None
    delta_ms: float | None = None
    aggregation: Aggregation = Aggregation.MEAN
    cardinality: Cardinality = Cardinality.ONE_TO_ONE
    sticky_margin: float = 0.10
    label: str | None = None

    def __post_init__(self) -> None:
        """Check invariants."""
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        object.__setattr__(self, "aggregation", Aggregation(self.aggregation))
        object.__setattr__(self, "cardinality", Cardinality(self.cardinality))

        if self.kind == StrategyKind.THRESHOLD:
            if (self.tau is None) == (self.delta_ms is None):
                raise ValueError("Threshold strategies need exactly one of tau and delta_ms")
        elif self.tau is not None or self.delta_ms is not None:
            raise ValueError(f"Strategy {self.kind.value} takes no threshold")

        if self.tau is not None and not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"Relative threshold {self.tau} outside [0, 1]")
        if self.delta_ms is not None and self.delta_ms <= 0:
            raise ValueError(f"Absolute threshold has to be positive, got {self.delta_ms}")
        if self.sticky_margin < 0:
            raise ValueError(f"Sticky margin has to be non-negative, got {self.sticky_margin}")
        if self.kind == StrategyKind.STICKY and self.cardinality == Cardinality.MANY_TO_MANY:
            raise ValueError("Sticky is only defined for one_to_one and many_to_one")

    @property
    def name(self) -> str:
        """Label or a name derived from the parameters."""
        if self.label is not None:
            return self.label
        match self.kind:
            case StrategyKind.THRESHOLD if self.tau is not None:
                return f"threshold-{self.tau * 100:g}%"
            case StrategyKind.THRESHOLD:
                return f"threshold-{self.delta_ms:g}ms"
            case _:
                return self.kind.value

    def with_threshold(self, value: float, absolute: bool = False) -> StrategySpec:
        """Threshold variant of this strategy, used by sweeps.

        Args:
            value: tau or delta in ms
            absolute: Value is delta in ms

        Returns:
            Threshold strategy with this aggregation and cardinality
        """
        return replace(
            self,
            kind=StrategyKind.THRESHOLD,
            tau=None if absolute else value,
            delta_ms=value if absolute else None,
            label=None,
        )

    def to_dict(self) -> dict:
        """Strategy as dict."""
        return CONVERTER(self)

    @classmethod
    def from_dict(cls, data: dict, cardinality: Cardinality | str | None = None) -> StrategySpec:
        """Strategy from a scenario entry.

        Args:
            data: Entry with kind and optional label, tau, delta_ms, aggregation
            cardinality: Cardinality if not in the entry

        Returns:
            Strategy
        """
        data = dict(data)
        if cardinality is not None:
            data.setdefault("cardinality", cardinality)
        return cls(**data)


@dataclass(frozen=True)
class MigrationEvent:
    """Service hand-off.

    Attributes:
        t_handoff: Hand-off time
        from_sat: Previous serving satellite, None at bootstrap
        to_sat: New serving satellite
        affected_clients: Clients moving to the new satellite
        replication_source: Replica the state is copied from, ORIGIN for the origin site and
            None outside many-to-many
    """

    t_handoff: int
    from_sat: FlatId | None
    to_sat: FlatId
    affected_clients: frozenset[str] = frozenset()
    replication_source: FlatId | None = None

    def __post_init__(self) -> None:
        """Check invariants."""
        if self.to_sat == self.from_sat:
            raise ValueError(f"Hand-off at t={self.t_handoff} from {self.to_sat} to itself")

    @property
    def bootstrap(self) -> bool:
        """Initial placement rather than a migration."""
        return self.from_sat is None


@dataclass(eq=False)
class Schedule:
    """Serving satellites over time.

    Attributes:
        spec: Strategy that produced the schedule
        clients: Client ids in trace order
        times: Timesteps
        assignment: Serving satellite per (timestep, client), NO_SATELLITE where unassigned
        replicas: Satellites hosting the service per timestep
        migrations: Hand-offs in time order
    """

    spec: StrategySpec
    clients: list[str]
    times: IntArray
    assignment: IntArray
    replicas: list[frozenset[FlatId]]
    migrations: list[MigrationEvent] = field(default_factory=list)

    def __post_init__(self) -> None:
        """Check invariants."""
        self.times = np.asarray(self.times, dtype=np.int64)
        self.assignment = np.asarray(self.assignment, dtype=np.int64).reshape(
            len(self.times), len(self.clients)
        )
        if len(self.replicas) != len(self.times):
            raise ValueError("Schedule needs one replica set per timestep")
        for step_index, replicas in enumerate(self.replicas):
            assigned = set(self.assignment[step_index][self.assignment[step_index] >= 0].tolist())
            if not assigned <= replicas:
                raise ValueError(
                    f"t={self.times[step_index]}: satellites {sorted(assigned - replicas)} are "
                    "assigned but host no replica"
                )

    @property
    def handoffs(self) -> list[MigrationEvent]:
        """Migrations without the bootstrap placements."""
        return [event for event in self.migrations if not event.bootstrap]

    @property
    def migration_count(self) -> int:
        """Number of hand-offs without bootstrap."""
        return len(self.handoffs)

    @property
    def step_s(self) -> int:
        """Timestep length."""
        return int(self.times[1] - self.times[0]) if len(self.times) > 1 else 1

    @property
    def duration_s(self) -> int:
        """End of the last timestep."""
        return int(self.times[-1]) + self.step_s if len(self.times) else 0

    @property
    def replica_counts(self) -> IntArray:
        """Number of replicas per timestep."""
        return np.array([len(replicas) for replicas in self.replicas], dtype=np.int64)

    def serving(self, t: int, site_id: str) -> FlatId | None:
        """Serving satellite of a client at time t."""
        step_index = int(np.searchsorted(self.times, t))
        if step_index >= len(self.times) or self.times[step_index] != t:
            raise KeyError(f"t={t} is not a timestep of the schedule")
        sat = int(self.assignment[step_index, self.clients.index(site_id)])
        return None if sat == NO_SATELLITE else sat

    def __eq__(self, other: object) -> bool:
        """Same strategy, assignment, replicas and migrations."""
        if not isinstance(other, Schedule):
            return NotImplemented
        return (
            self.spec == other.spec
            and self.clients == other.clients
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.assignment, other.assignment)
            and self.replicas == other.replicas
            and self.migrations == other.migrations
        )

    def __str__(self) -> str:
        """Short schedule description."""
        return (
            f"Schedule '{self.spec.name}': {self.migration_count} migrations, "
            f"{np.mean(self.replica_counts) if len(self.times) else 0:.2f} mean replicas"
        )


def _join(values: list) -> str:
    """Semicolon-separated list."""
    return ";".join(str(value) for value in values)


def _split(value: str) -> list[str]:
    """Inverse of _join, the empty string is the empty list."""
    return value.split(";") if value else []


def schedule_table(schedule: Schedule) -> pd.DataFrame:
    """Serving satellite of every (t, client) as table."""
    n_clients = len(schedule.clients)
    return pd.DataFrame(
        {
            "t_s": np.repeat(schedule.times, n_clients),
            "site_id": np.tile(np.asarray(schedule.clients, dtype=object), len(schedule.times)),
            "serving_sat": schedule.assignment.reshape(-1),
        },
        columns=list(SCHEDULE_COLUMNS),
    )


def write_schedule(schedule: Schedule, out_dir: Path) -> pathlib.Path:
    """Write schedule.csv, events.csv, replicas.csv and strategy.yaml.

    Args:
        schedule: Schedule
        out_dir: Output directory

    Returns:
        Output directory
    """
    out_dir = pathlib.Path(out_dir)
    write_csv_table(schedule_table(schedule), out_dir / "schedule.csv")
    write_csv_table(
        pd.DataFrame(
            [
                {
                    "t_handoff_s": event.t_handoff,
                    "from_sat": NO_SATELLITE if event.from_sat is None else event.from_sat,
                    "to_sat": event.to_sat,
                    "replication_source": (
                        ORIGIN if event.replication_source is None else event.replication_source
                    ),
                    "clients": _join(sorted(event.affected_clients)),
                }
                for event in schedule.migrations
            ],
            columns=list(EVENTS_COLUMNS),
        ),
        out_dir / "events.csv",
    )
    write_csv_table(
        pd.DataFrame(
            {
                "t_s": schedule.times,
                "replicas": [_join(sorted(replicas)) for replicas in schedule.replicas],
            },
            columns=list(REPLICAS_COLUMNS),
        ),
        out_dir / "replicas.csv",
    )
    dump_yaml(
        {"strategy": schedule.spec.to_dict(), "clients": schedule.clients},
        out_dir / "strategy.yaml",
    )
    return out_dir


def read_schedule(out_dir: Path) -> Schedule:
    """Read a schedule written by write_schedule.

    Args:
        out_dir: Directory with the schedule files

    Returns:
        Schedule
    """
    out_dir = pathlib.Path(out_dir)
    metadata = load_yaml(out_dir / "strategy.yaml")
    spec = StrategySpec(**metadata["strategy"])
    clients = [str(client) for client in metadata["clients"]]

    replicas_table = read_csv_table(
        out_dir / "replicas.csv", REPLICAS_COLUMNS, may_be_empty=("replicas",)
    )
    times = replicas_table["t_s"].to_numpy()
    replicas = [
        frozenset(int(sat) for sat in _split(value)) for value in replicas_table["replicas"]
    ]

    schedule_table = read_csv_table(out_dir / "schedule.csv", SCHEDULE_COLUMNS)
    assignment = schedule_table["serving_sat"].to_numpy().reshape(len(times), len(clients))

    is_many_to_many = spec.cardinality == Cardinality.MANY_TO_MANY
    migrations = [
        MigrationEvent(
            t_handoff=int(row.t_handoff_s),
            from_sat=None if row.from_sat == NO_SATELLITE else int(row.from_sat),
            to_sat=int(row.to_sat),
            affected_clients=frozenset(_split(row.clients)),
            replication_source=int(row.replication_source) if is_many_to_many else None,
        )
        for row in read_csv_table(
            out_dir / "events.csv", EVENTS_COLUMNS, may_be_empty=("clients",)
        ).itertuples(index=False)
    ]
    return Schedule(spec, clients, times, assignment, replicas, migrations)
