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
"""Visibility, inter-satellite links and routed latencies."""

from __future__ import annotations

import enum
import math
from collections.abc import Hashable, Sequence
from dataclasses import asdict, dataclass, field

import networkx as nx
import numpy as np
from loguru import logger

from leoedgesim import CONFIG
from leoedgesim.orbits import (
    ConstellationState,
    EcefPoint,
    GroundSite,
    SatelliteId,
    ShellSpec,
    propagate,
    sites_to_ecef,
)
from leoedgesim.utils.type_hinting import FlatId, FloatArray

Edge = tuple[FlatId, FlatId]


class Attachment(str, enum.Enum):
    """How a ground site enters the satellite network.

    ACCESS routes everything through the nearest visible satellite, MULTI_HOMED lets the site
    use any visible satellite as entry point.
    """

    ACCESS = "access"
    MULTI_HOMED = "multi_homed"


@dataclass(frozen=True)
class LinkModel:
    """Link parameters.

    Attributes:
        min_elevation_deg: Minimum elevation above the local horizon
        propagation_speed_km_s: Signal speed on ground links and ISLs
        isl_bandwidth_gbps: Inter-satellite link bandwidth
        gsl_bandwidth_gbps: Ground-to-satellite link bandwidth
        attachment: Network attachment of ground sites
    """

    min_elevation_deg: float = 25.0
    propagation_speed_km_s: float = 299792.458
    isl_bandwidth_gbps: float = 10.0
    gsl_bandwidth_gbps: float = 10.0
    attachment: Attachment = Attachment.ACCESS

    def __post_init__(self) -> None:
        """Check invariants."""
        if not 0.0 <= self.min_elevation_deg < 90.0:
            raise ValueError(
                f"Minimum elevation {self.min_elevation_deg} deg outside [0, 90)"
            )
        if self.propagation_speed_km_s <= 0:
            raise ValueError(
                f"Propagation speed has to be positive, got {self.propagation_speed_km_s}"
            )
        object.__setattr__(self, "attachment", Attachment(self.attachment))

    def delay_ms(self, distance_km: float | FloatArray) -> float | FloatArray:
        """One-way propagation delay of a distance."""
        return 1000.0 * distance_km / self.propagation_speed_km_s

    def to_dict(self) -> dict:
        """Link model as dict."""
        return asdict(self) | {"attachment": self.attachment.value}

    @classmethod
    def from_config(cls, **overrides: object) -> LinkModel:
        """Link model of the active config profile.

        Args:
            overrides: Parameters replacing the profile values

        Returns:
            Link model
        """
        return cls(**(CONFIG.link | overrides))


def _elevation_sine(
    sat_positions: FloatArray, site_position: FloatArray
) -> tuple[FloatArray, FloatArray]:
    """Sine of the elevation and the slant range of satellites seen from a site."""
    line_of_sight = sat_positions - site_position
    slant_range = np.linalg.norm(line_of_sight, axis=-1)
    up = site_position / np.linalg.norm(site_position)
    return (line_of_sight @ up) / slant_range, slant_range


def visibility(sat: EcefPoint, site: EcefPoint, model: LinkModel) -> float | None:
    """Slant range if the satellite is visible from the site.

    Args:
        sat: Satellite position
        site: Site position
        model: Link model with the minimum elevation

    Returns:
        Slant range in kilometers, None if below the elevation mask
    """
    elevation_sine, slant_range = _elevation_sine(
        np.asarray(sat, dtype=float), np.asarray(site, dtype=float)
    )
    if elevation_sine >= math.sin(math.radians(model.min_elevation_deg)):
        return float(slant_range)
    return None


def visible_satellites(
    positions: FloatArray, site: FloatArray, model: LinkModel
) -> tuple[np.ndarray, FloatArray]:
    """Vectorized visibility of all satellites from one site.

    Args:
        positions: Satellite positions (n_satellites x 3)
        site: Site position
        model: Link model

    Returns:
        Flat ids of the visible satellites in ascending order and their slant ranges
    """
    elevation_sine, slant_range = _elevation_sine(positions, site)
    visible = np.flatnonzero(
        elevation_sine >= math.sin(math.radians(model.min_elevation_deg))
    )
    return visible, slant_range[visible]


def build_isl_grid(spec: ShellSpec) -> list[Edge]:
    """+grid inter-satellite links of a shell.

    Every satellite links to its two in-plane neighbors and to the satellite with the same slot
    in both adjacent planes.

    Args:
        spec: Shell

    Returns:
        Sorted edges (lower flat id first) without duplicates and self-loops
    """
    edges: set[Edge] = set()
    for plane_index in range(spec.planes):
        for slot_index in range(spec.sats_per_plane):
            sat = SatelliteId.from_plane_slot(spec, plane_index, slot_index)
            neighbors = (
                SatelliteId.from_plane_slot(spec, plane_index, slot_index + 1),
                SatelliteId.from_plane_slot(spec, plane_index + 1, slot_index),
            )
            for neighbor in neighbors:
                if neighbor.flat_id != sat.flat_id:
                    edges.add(
                        (
                            min(sat.flat_id, neighbor.flat_id),
                            max(sat.flat_id, neighbor.flat_id),
                        )
                    )
    return sorted(edges)


def isl_graph(
    state: ConstellationState, edges: Sequence[Edge], model: LinkModel
) -> nx.Graph:
    """Weighted ISL graph of a timestep.

    Args:
        state: Constellation state
        edges: ISL edges
        model: Link model

    Returns:
        Graph over flat ids with one-way delays in ms as 'delay' weight
    """
    graph = nx.Graph()
    graph.add_nodes_from(range(len(state)))
    if edges:
        edge_array = np.asarray(edges, dtype=int)
        lengths = np.linalg.norm(
            state.positions[edge_array[:, 0]] - state.positions[edge_array[:, 1]], axis=1
        )
        graph.add_weighted_edges_from(
            zip(edge_array[:, 0].tolist(), edge_array[:, 1].tolist(), model.delay_ms(lengths)),
            weight="delay",
        )
    return graph


def path_delays(graph: nx.Graph, source: Hashable, n_satellites: int) -> FloatArray:
    """Lowest one-way delays from a node to every satellite.

    Args:
        graph: Graph with the satellites as nodes 0 to n_satellites - 1 and a 'delay' weight
        source: Start node, a satellite or a site node
        n_satellites: Number of satellites

    Returns:
        Delay in ms per flat id, NaN where unreachable
    """
    delays = np.full(n_satellites, np.nan)
    distances = nx.single_source_dijkstra_path_length(graph, source, weight="delay")
    for node, delay in distances.items():
        if isinstance(node, int):
            delays[node] = delay
    return delays


@dataclass(frozen=True)
class NetworkSnapshot:
    """Network state at one instant.

    Attributes:
        t: Seconds since scenario start
        access: Site id to (access satellite, slant range in km), absent if no satellite is
            visible
        latency_ms: Site id to one-way latencies to every satellite indexed by flat id, NaN if
            unreachable, absent if the site has no coverage
        visible: Site id to the flat ids of its visible satellites
    """

    t: float
    access: dict[str, tuple[SatelliteId, float]]
    latency_ms: dict[str, FloatArray] = field(repr=False)
    visible: dict[str, frozenset[FlatId]] = field(repr=False)

    def latency(self, site_id: str, sat: SatelliteId | FlatId) -> float | None:
        """One-way latency from a site to a satellite.

        Args:
            site_id: Site id
            sat: Satellite

        Returns:
            Latency in ms or None if the site has no coverage
        """
        if site_id not in self.latency_ms:
            return None
        flat_id = sat.flat_id if isinstance(sat, SatelliteId) else int(sat)
        value = self.latency_ms[site_id][flat_id]
        return None if np.isnan(value) else float(value)


def snapshot(
    state: ConstellationState,
    sites: Sequence[GroundSite],
    edges: Sequence[Edge],
    model: LinkModel,
    t: float | None = None,
) -> NetworkSnapshot:
    """Routed one-way latencies from every site to every satellite.

    With ACCESS attachment the latency to satellite s is the uplink to the access satellite
    plus the shortest ISL path from there to s. With MULTI_HOMED the minimum over all visible
    entry satellites is taken.

    Args:
        state: Constellation state
        sites: Ground sites
        edges: ISL edges
        model: Link model
        t: Snapshot time, defaults to the state time

    Returns:
        Network snapshot
    """
    t = state.t if t is None else t
    n_satellites = len(state)
    graph = isl_graph(state, edges, model)
    site_positions = sites_to_ecef(sites)

    access: dict[str, tuple[SatelliteId, float]] = {}
    latency_ms: dict[str, FloatArray] = {}
    visible: dict[str, frozenset[FlatId]] = {}
    isl_from_access: dict[FlatId, FloatArray] = {}

    for site, site_position in zip(sites, site_positions):
        visible_ids, slant_ranges = visible_satellites(state.positions, site_position, model)
        visible[site.site_id] = frozenset(visible_ids.tolist())
        if visible_ids.size == 0:
            logger.debug(f"t={t}: no satellite visible from {site.site_id}")
            continue

        # argmin returns the first minimum, i.e. the lowest flat id on ties
        nearest = int(np.argmin(slant_ranges))
        access_id = int(visible_ids[nearest])
        access[site.site_id] = (
            SatelliteId.from_flat(state.spec, access_id),
            float(slant_ranges[nearest]),
        )

        match model.attachment:
            case Attachment.ACCESS:
                if access_id not in isl_from_access:
                    isl_from_access[access_id] = path_delays(graph, access_id, n_satellites)
                latency_ms[site.site_id] = (
                    model.delay_ms(slant_ranges[nearest]) + isl_from_access[access_id]
                )
            case Attachment.MULTI_HOMED:
                site_node = ("site", site.site_id)
                graph.add_weighted_edges_from(
                    (
                        (site_node, sat_id, uplink)
                        for sat_id, uplink in zip(
                            visible_ids.tolist(), model.delay_ms(slant_ranges).tolist()
                        )
                    ),
                    weight="delay",
                )
                latency_ms[site.site_id] = path_delays(graph, site_node, n_satellites)
                graph.remove_node(site_node)

    return NetworkSnapshot(t=t, access=access, latency_ms=latency_ms, visible=visible)


def isl_delay(
    state: ConstellationState,
    edges: Sequence[Edge],
    model: LinkModel,
    a: SatelliteId | FlatId,
    b: SatelliteId | FlatId,
) -> float:
    """Shortest-path ISL delay between two satellites.

    Args:
        state: Constellation state
        edges: ISL edges
        model: Link model
        a: First satellite
        b: Second satellite

    Returns:
        One-way delay in ms, inf if disconnected
    """
    a = a.flat_id if isinstance(a, SatelliteId) else int(a)
    b = b.flat_id if isinstance(b, SatelliteId) else int(b)
    try:
        return float(
            nx.dijkstra_path_length(isl_graph(state, edges, model), a, b, weight="delay")
        )
    except nx.NetworkXNoPath:
        return math.inf


class IslDelayOracle:
    """ISL delays between satellites of a shell, cached for the current timestep."""

    def __init__(self, shell: ShellSpec, link: LinkModel) -> None:
        """Initialise oracle.

        Args:
            shell: Shell
            link: Link model
        """
        self.shell = shell
        self.link = link
        self.edges = build_isl_grid(shell)
        self._t: float | None = None
        self._graph: nx.Graph | None = None
        self._distances: dict[FlatId, FloatArray] = {}

    def _graph_at(self, t: float) -> nx.Graph:
        """ISL graph at time t."""
        if t != self._t or self._graph is None:
            self._t = t
            self._graph = isl_graph(propagate(self.shell, t), self.edges, self.link)
            self._distances = {}
        return self._graph

    def __call__(self, t: float, a: FlatId, b: FlatId) -> float:
        """ISL delay in ms between two satellites at time t."""
        if a == b:
            return 0.0
        graph = self._graph_at(t)
        if a not in self._distances:
            self._distances[a] = path_delays(graph, a, self.shell.n_satellites)
        delay = float(self._distances[a][b])
        return math.inf if math.isnan(delay) else delay
