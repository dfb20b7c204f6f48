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
"""Scenario latency traces.

A trace holds the one-way latency from every client to every (candidate) satellite at every
timestep of a scenario. Strategies only consume traces, so geometry is computed once per
scenario.
"""

from __future__ import annotations

import math
import pathlib
from collections.abc import Iterator
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple

import numpy as np
import pandas as pd
from loguru import logger

from leoedgesim import CONFIG
from leoedgesim.orbits import (
    GroundSite,
    ShellSpec,
    SiteRole,
    jitter_sites,
    load_shell,
    load_sites,
    propagate,
)
from leoedgesim.topology import Edge, LinkModel, build_isl_grid, snapshot
from leoedgesim.utils.csv_io import CsvParseError, read_csv_table, write_csv_table
from leoedgesim.utils.type_hinting import FloatArray, IntArray, Path
from leoedgesim.utils.validation import load_schema, validate_using_json_schema
from leoedgesim.utils.yaml_io import dump_yaml, load_structured_file, load_yaml

TRACE_COLUMNS = {"t_s": int, "site_id": str, "sat_id": int, "one_way_us": int}
GAP_SAT_ID = -1


@dataclass
class ScenarioConfig:
    """Scenario.

    Attributes:
        shell: Constellation shell
        link: Link model
        sites: Ground sites, only clients appear in traces
        duration_s: Trace duration
        step_s: Timestep
        ramp_up_s: Leading seconds excluded from metrics
        name: Scenario name
        description: Scenario description
        candidates_only: Per-client number of lowest-latency satellites kept in traces
        aggregate_candidates: Number of satellites with the lowest mean and the lowest RMS
            latency over all clients kept in traces
        cardinality: Default service cardinality of the scenario
        strategies: Strategy definitions run by the scenario command
    """

    shell: ShellSpec
    link: LinkModel
    sites: list[GroundSite]
    duration_s: int
    step_s: int = 1
    ramp_up_s: int = 0
    name: str = "scenario"
    description: str = ""
    candidates_only: int | None = None
    aggregate_candidates: int | None = None
    cardinality: str = "one_to_one"
    strategies: list[dict] = field(default_factory=list)

    def __post_init__(self) -> None:
        """Check invariants."""
        if self.step_s < 1:
            raise ValueError(f"Timestep has to be at least 1 s, got {self.step_s}")
        if self.duration_s != 0 and self.duration_s < self.step_s:
            raise ValueError(
                f"Duration {self.duration_s} s is shorter than the timestep {self.step_s} s"
            )
        if self.ramp_up_s < 0:
            raise ValueError(f"Ramp-up has to be non-negative, got {self.ramp_up_s}")
        for limit in (self.candidates_only, self.aggregate_candidates):
            if limit is not None and limit < 1:
                raise ValueError(f"Number of candidates has to be positive, got {limit}")
        site_ids = [site.site_id for site in self.sites]
        if len(set(site_ids)) != len(site_ids):
            raise ValueError(f"Duplicate site ids in scenario {self.name}")

    @property
    def clients(self) -> list[GroundSite]:
        """Client sites sorted by site id."""
        return sorted(
            (site for site in self.sites if site.role == SiteRole.CLIENT),
            key=lambda site: site.site_id,
        )

    @property
    def origin(self) -> GroundSite | None:
        """Origin site, if any."""
        return next((site for site in self.sites if site.role == SiteRole.ORIGIN), None)

    @property
    def times(self) -> IntArray:
        """Timesteps of the scenario."""
        return np.arange(0, self.duration_s, self.step_s, dtype=np.int64)

    def to_dict(self) -> dict:
        """Scenario with inline shell and sites."""
        return {
            "name": self.name,
            "description": self.description,
            "shell": self.shell.to_dict(),
            "link": self.link.to_dict(),
            "sites": [asdict(site) | {"role": site.role.value} for site in self.sites],
            "duration_s": self.duration_s,
            "step_s": self.step_s,
            "ramp_up_s": self.ramp_up_s,
            "candidates_only": self.candidates_only,
            "aggregate_candidates": self.aggregate_candidates,
            "cardinality": self.cardinality,
            "strategies": self.strategies,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioConfig:
        """Create a scenario from its inline dict.

        Args:
            data: Data as created by to_dict

        Returns:
            Scenario
        """
        data = dict(data)
        data["shell"] = ShellSpec(**data["shell"])
        data["link"] = LinkModel(**data["link"])
        data["sites"] = [
            GroundSite(**(site | {"site_id": str(site["site_id"])})) for site in data["sites"]
        ]
        data["strategies"] = data.get("strategies") or []
        return cls(**data)


def _resolve_relative(
    path: str, scenario_dir: pathlib.Path, fallback: pathlib.Path
) -> pathlib.Path:
    """Resolve a referenced file next to the scenario, else in the bundled directory."""
    candidate = pathlib.Path(path)
    if candidate.is_absolute():
        return candidate
    if (scenario_dir / candidate).is_file():
        return scenario_dir / candidate
    return fallback / candidate


def load_scenario(path: Path, seed: int | None = None) -> ScenarioConfig:
    """Load a scenario file (YAML, JSON or TOML).

    Shell and sites files are resolved relative to the scenario file and, for sites, then
    relative to the bundled sites directory.

    Args:
        path: Scenario file
        seed: Jitter client coordinates with this seed

    Returns:
        Scenario
    """
    path = pathlib.Path(path)
    data = load_structured_file(path)
    validate_using_json_schema(data, load_schema("scenario"), str(path))

    scenario_dir = path.parent
    if isinstance(data["shell"], str):
        shell = load_shell(_resolve_relative(data["shell"], scenario_dir, scenario_dir))
    else:
        shell = ShellSpec.from_dict(data["shell"], f"{path}[shell]")

    sites = load_sites(_resolve_relative(data["sites"], scenario_dir, CONFIG.sites_path))
    if seed is not None:
        clients = [site for site in sites if site.role == SiteRole.CLIENT]
        jittered = dict(
            zip((site.site_id for site in clients), jitter_sites(clients, seed))
        )
        sites = [jittered.get(site.site_id, site) for site in sites]
        logger.info(f"Jittered {len(clients)} client sites with seed {seed}")

    return ScenarioConfig(
        shell=shell,
        link=LinkModel.from_config(**data.get("link", {})),
        sites=sites,
        duration_s=data["duration_s"],
        step_s=data.get("step_s", 1),
        ramp_up_s=data.get("ramp_up_s", 0),
        name=data.get("name", path.stem),
        description=data.get("description", ""),
        candidates_only=data.get("candidates_only", CONFIG.candidates_only),
        aggregate_candidates=data.get("aggregate_candidates"),
        cardinality=data.get("cardinality", "one_to_one"),
        strategies=data.get("strategies", []),
    )


class TraceFrame(NamedTuple):
    """Dense latencies of one timestep.

    Attributes:
        t: Timestep
        latency_ms: One-way latencies (n_clients x n_satellites), NaN if absent
    """

    t: int
    latency_ms: FloatArray

    @property
    def covered(self) -> np.ndarray:
        """Mask of clients with at least one latency."""
        return ~np.all(np.isnan(self.latency_ms), axis=1)


@dataclass(eq=False)
class Trace:
    """Latency trace.

    Rows are stored as column arrays sorted by (t, client, satellite). Clients are referenced
    by their index in the sorted client list.

    Attributes:
        clients: Client site ids in ascending order
        times: Timesteps of the trace
        n_satellites: Number of satellites in the shell
        t: Row timesteps
        site_index: Row client indices
        sat: Row satellite flat ids
        one_way_us: Row one-way latencies in microseconds
        gap_t: Timesteps of coverage gaps
        gap_site_index: Client indices of coverage gaps
        step_s: Timestep length
        ramp_up_s: Leading seconds excluded from metrics
        config: Scenario the trace was generated from, if known
    """

    clients: list[str]
    times: IntArray
    n_satellites: int
    t: IntArray
    site_index: IntArray
    sat: IntArray
    one_way_us: IntArray
    gap_t: IntArray
    gap_site_index: IntArray
    step_s: int = 1
    ramp_up_s: int = 0
    config: ScenarioConfig | None = None

    def __post_init__(self) -> None:
        """Sort rows and build the per-timestep index."""
        order = np.lexsort((self.sat, self.site_index, self.t))
        self.t = np.asarray(self.t, dtype=np.int64)[order]
        self.site_index = np.asarray(self.site_index, dtype=np.int64)[order]
        self.sat = np.asarray(self.sat, dtype=np.int64)[order]
        self.one_way_us = np.asarray(self.one_way_us, dtype=np.int64)[order]

        gap_order = np.lexsort((self.gap_site_index, self.gap_t))
        self.gap_t = np.asarray(self.gap_t, dtype=np.int64)[gap_order]
        self.gap_site_index = np.asarray(self.gap_site_index, dtype=np.int64)[gap_order]
        self.times = np.asarray(self.times, dtype=np.int64)

        if np.any(self.one_way_us <= 0):
            raise ValueError("Trace latencies have to be positive")

        self._starts = np.searchsorted(self.t, self.times, side="left")
        self._ends = np.searchsorted(self.t, self.times, side="right")

    @property
    def n_clients(self) -> int:
        """Number of clients."""
        return len(self.clients)

    @property
    def n_rows(self) -> int:
        """Number of latency rows."""
        return len(self.t)

    @property
    def duration_s(self) -> int:
        """Trace duration."""
        if self.config is not None:
            return self.config.duration_s
        return int(self.times[-1]) + self.step_s if len(self.times) else 0

    def frame(self, step_index: int) -> TraceFrame:
        """Dense latency matrix of a timestep.

        Args:
            step_index: Index into times

        Returns:
            Frame of the timestep
        """
        rows = slice(self._starts[step_index], self._ends[step_index])
        latency_ms = np.full((self.n_clients, self.n_satellites), np.nan)
        latency_ms[self.site_index[rows], self.sat[rows]] = self.one_way_us[rows] / 1000.0
        return TraceFrame(int(self.times[step_index]), latency_ms)

    def frames(self) -> Iterator[TraceFrame]:
        """Dense latency matrices of all timesteps in order."""
        for step_index in range(len(self.times)):
            yield self.frame(step_index)

    def gaps(self) -> set[tuple[int, str]]:
        """Coverage gaps as (t, site_id)."""
        return {
            (int(t), self.clients[i]) for t, i in zip(self.gap_t, self.gap_site_index)
        }

    def __eq__(self, other: object) -> bool:
        """Rows, gaps and axes are equal."""
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.clients == other.clients
            and self.n_satellites == other.n_satellites
            and self.step_s == other.step_s
            and np.array_equal(self.times, other.times)
            and all(
                np.array_equal(getattr(self, name), getattr(other, name))
                for name in ("t", "site_index", "sat", "one_way_us", "gap_t", "gap_site_index")
            )
        )

    def __str__(self) -> str:
        """Short trace description."""
        name = self.config.name if self.config is not None else "trace"
        return (
            f"Trace '{name}': {self.n_clients} clients, {len(self.times)} timesteps, "
            f"{self.n_rows} rows, {len(self.gap_t)} gaps"
        )


def candidate_columns(
    latency_ms: FloatArray, per_client: int | None, aggregate: int | None
) -> IntArray:
    """Satellites kept in a trace timestep.

    Args:
        latency_ms: One-way latencies of the covered clients (n_clients x n_satellites)
        per_client: Keep every client's k lowest-latency satellites
        aggregate: Keep the k satellites with the lowest mean and the k with the lowest RMS
            latency over all clients

    Returns:
        Flat ids in ascending order, all satellites if both limits are None
    """
    if per_client is None and aggregate is None:
        return np.arange(latency_ms.shape[1])

    # NaN sorts last, stable sorts break ties by flat id
    selected = []
    if per_client is not None:
        selected.append(np.argsort(latency_ms, axis=1, kind="stable")[:, :per_client].ravel())
    if aggregate is not None:
        for aggregated in (
            np.mean(latency_ms, axis=0),
            np.sqrt(np.mean(latency_ms**2, axis=0)),
        ):
            best = np.argsort(aggregated, kind="stable")[:aggregate]
            selected.append(best[~np.isnan(aggregated[best])])
    return np.unique(np.concatenate(selected))


class _TimestepRows:
    """Trace rows of single timesteps, picklable for worker processes."""

    def __init__(self, config: ScenarioConfig) -> None:
        self.config = config
        self.clients = config.clients
        self.edges: list[Edge] = build_isl_grid(config.shell)

    def __call__(self, t: int) -> tuple[IntArray, IntArray, IntArray, IntArray]:
        """Rows (client index, satellite, microseconds) and gap client indices at t."""
        network = snapshot(
            propagate(self.config.shell, float(t)), self.clients, self.edges, self.config.link, t
        )

        is_covered = np.array(
            [site.site_id in network.latency_ms for site in self.clients], dtype=bool
        )
        covered = np.flatnonzero(is_covered)
        gaps = np.flatnonzero(~is_covered)
        if covered.size == 0:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty, empty, gaps

        latency_ms = np.vstack([network.latency_ms[self.clients[i].site_id] for i in covered])
        columns = candidate_columns(
            latency_ms, self.config.candidates_only, self.config.aggregate_candidates
        )

        values = latency_ms[:, columns]
        row_index, column_index = np.nonzero(~np.isnan(values))
        one_way_us = np.maximum(np.rint(values[row_index, column_index] * 1000.0), 1)
        return (
            covered[row_index].astype(np.int64),
            columns[column_index].astype(np.int64),
            one_way_us.astype(np.int64),
            gaps.astype(np.int64),
        )


def generate_trace(
    config: ScenarioConfig,
    workers: int | None = None,
    candidates_only: int | None = None,
    aggregate_candidates: int | None = None,
) -> Trace:
    """Generate a trace from a scenario.

    Timesteps are independent, with more than one worker they are computed in a process pool
    and merged in timestep order.

    Args:
        config: Scenario
        workers: Number of worker processes, defaults to the config profile
        candidates_only: Keep per timestep the union of every client's k lowest-latency
            satellites, defaults to the scenario setting
        aggregate_candidates: Keep per timestep the k satellites with the lowest mean and RMS
            latency, defaults to the scenario setting

    Returns:
        Trace
    """
    workers = CONFIG.workers if workers is None else workers
    if candidates_only is not None:
        config = replace(config, candidates_only=candidates_only)
    if aggregate_candidates is not None:
        config = replace(config, aggregate_candidates=aggregate_candidates)
    times = config.times
    timestep_rows = _TimestepRows(config)

    logger.info(
        f"Generating trace '{config.name}': {len(timestep_rows.clients)} clients, "
        f"{len(times)} timesteps, {config.shell.n_satellites} satellites, {workers} worker(s)"
    )
    if workers > 1 and len(times) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(
                executor.map(
                    timestep_rows, times.tolist(), chunksize=max(1, len(times) // (4 * workers))
                )
            )
    else:
        results = [timestep_rows(t) for t in times.tolist()]

    def concatenate(index: int, repeat_times: bool = False) -> IntArray:
        """Concatenate one result component over all timesteps."""
        if not results:
            return np.empty(0, dtype=np.int64)
        if repeat_times:
            return np.concatenate(
                [
                    np.full(len(result[index]), t, dtype=np.int64)
                    for t, result in zip(times, results)
                ]
            )
        return np.concatenate([result[index] for result in results])

    trace = Trace(
        clients=[site.site_id for site in timestep_rows.clients],
        times=times,
        n_satellites=config.shell.n_satellites,
        t=concatenate(0, repeat_times=True),
        site_index=concatenate(0),
        sat=concatenate(1),
        one_way_us=concatenate(2),
        gap_t=concatenate(3, repeat_times=True),
        gap_site_index=concatenate(3),
        step_s=config.step_s,
        ramp_up_s=config.ramp_up_s,
        config=config,
    )
    logger.info(trace)
    return trace


def trace_metadata_path(path: Path) -> pathlib.Path:
    """Path of the metadata sidecar of a trace CSV."""
    return pathlib.Path(path).with_suffix(".meta.yaml")


def trace_table(trace: Trace) -> pd.DataFrame:
    """Trace rows and gaps as table.

    Gaps are encoded as rows with sat_id -1 and one_way_us 0.

    Args:
        trace: Trace

    Returns:
        Table with the trace CSV columns sorted by (t, client, satellite)
    """
    clients = np.asarray(trace.clients, dtype=object)
    rows = pd.DataFrame(
        {
            "t_s": np.concatenate([trace.t, trace.gap_t]),
            "site_index": np.concatenate([trace.site_index, trace.gap_site_index]),
            "sat_id": np.concatenate(
                [trace.sat, np.full(len(trace.gap_t), GAP_SAT_ID, dtype=np.int64)]
            ),
            "one_way_us": np.concatenate(
                [trace.one_way_us, np.zeros(len(trace.gap_t), dtype=np.int64)]
            ),
        }
    ).sort_values(["t_s", "site_index", "sat_id"], kind="stable")
    rows.insert(1, "site_id", clients[rows["site_index"].to_numpy()] if len(rows) else [])
    return rows[list(TRACE_COLUMNS)].reset_index(drop=True)


def write_trace(trace: Trace, path: Path) -> pathlib.Path:
    """Write a trace CSV and its metadata sidecar.

    Args:
        trace: Trace
        path: CSV path

    Returns:
        CSV path
    """
    path = write_csv_table(trace_table(trace), path)

    metadata = {
        "clients": trace.clients,
        "times": {
            "start": int(trace.times[0]) if len(trace.times) else 0,
            "stop": trace.duration_s,
            "step": trace.step_s,
        },
        "n_satellites": trace.n_satellites,
        "ramp_up_s": trace.ramp_up_s,
    }
    if trace.config is not None:
        metadata["scenario"] = trace.config.to_dict()
    dump_yaml(metadata, trace_metadata_path(path))
    return path


def read_trace(path: Path) -> Trace:
    """Read a trace CSV and, if present, its metadata sidecar.

    Without sidecar, clients, timesteps and shell size are inferred from the rows.

    Args:
        path: CSV path

    Returns:
        Trace
    """
    path = pathlib.Path(path)
    table = read_csv_table(path, TRACE_COLUMNS)

    is_gap = table["sat_id"].to_numpy() == GAP_SAT_ID
    invalid = (
        (table["t_s"].to_numpy() < 0)
        | (is_gap & (table["one_way_us"].to_numpy() != 0))
        | (~is_gap & (table["one_way_us"].to_numpy() <= 0))
        | (table["sat_id"].to_numpy() < GAP_SAT_ID)
    )
    if invalid.any():
        line = int(np.flatnonzero(invalid)[0]) + 2
        raise CsvParseError(path, line, "invalid trace row")

    metadata_path = trace_metadata_path(path)
    if metadata_path.is_file():
        metadata = load_yaml(metadata_path)
        clients = [str(client) for client in metadata["clients"]]
        times = np.arange(
            metadata["times"]["start"], metadata["times"]["stop"], metadata["times"]["step"]
        )
        step_s = int(metadata["times"]["step"])
        n_satellites = int(metadata["n_satellites"])
        ramp_up_s = int(metadata.get("ramp_up_s", 0))
        config = (
            ScenarioConfig.from_dict(metadata["scenario"]) if "scenario" in metadata else None
        )
    else:
        logger.debug(f"No metadata for {path}, inferring trace axes")
        clients = sorted(set(table["site_id"]))
        times = np.unique(table["t_s"].to_numpy())
        step_s = int(np.min(np.diff(times))) if len(times) > 1 else 1
        n_satellites = int(table["sat_id"].max()) + 1 if len(table) else 0
        ramp_up_s = 0
        config = None

    index_of = {client: i for i, client in enumerate(clients)}
    if unknown := set(table["site_id"]) - set(index_of):
        line = int(np.flatnonzero(~table["site_id"].isin(index_of).to_numpy())[0]) + 2
        raise CsvParseError(path, line, f"unknown clients {', '.join(sorted(unknown))}")
    if len(table) and int(table["sat_id"].max()) >= n_satellites:
        line = int(np.flatnonzero(table["sat_id"].to_numpy() >= n_satellites)[0]) + 2
        raise CsvParseError(path, line, f"satellite id outside a shell of {n_satellites}")

    site_index = table["site_id"].map(index_of).to_numpy(dtype=np.int64)
    rows = ~is_gap
    return Trace(
        clients=clients,
        times=times,
        n_satellites=n_satellites,
        t=table["t_s"].to_numpy()[rows],
        site_index=site_index[rows],
        sat=table["sat_id"].to_numpy()[rows],
        one_way_us=table["one_way_us"].to_numpy()[rows],
        gap_t=table["t_s"].to_numpy()[is_gap],
        gap_site_index=site_index[is_gap],
        step_s=step_s,
        ramp_up_s=ramp_up_s,
        config=config,
    )


def nearest_satellites(trace: Trace, site_id: str) -> list[tuple[int, int]]:
    """Minimum-latency satellite of a client at every covered timestep.

    Args:
        trace: Trace
        site_id: Client

    Returns:
        (t, flat id) pairs, ties broken by lowest flat id
    """
    client = trace.clients.index(site_id)
    nearest = []
    for frame in trace.frames():
        latencies = frame.latency_ms[client]
        if not np.all(np.isnan(latencies)):
            nearest.append((frame.t, int(np.nanargmin(latencies))))
    return nearest


def nearest_handoff_period(trace: Trace, site_id: str) -> float:
    """Mean time between changes of a client's minimum-latency satellite.

    Args:
        trace: Trace
        site_id: Client

    Returns:
        Mean seconds between consecutive changes, NaN with fewer than two changes
    """
    nearest = nearest_satellites(trace, site_id)
    change_times = [
        t for (t, sat), (_, previous) in zip(nearest[1:], nearest[:-1]) if sat != previous
    ]
    if len(change_times) < 2:
        logger.warning(
            f"Client {site_id} sees {len(change_times)} hand-off(s), no hand-off period"
        )
        return math.nan
    return float(np.mean(np.diff(change_times)))


def load_bundled_scenario(name: str, seed: int | None = None) -> ScenarioConfig:
    """Load a bundled scenario by name.

    Args:
        name: Scenario name, e.g. 'single-client'
        seed: Optional client jitter seed

    Returns:
        Scenario
    """
    return load_scenario(CONFIG.scenario_file(name), seed)

