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
"""Many-to-many replica placement as a hitting set.

Every client has a set of acceptable satellites. The replica set has to contain at least one
satellite of every set. Finding the smallest such set is NP-hard, it is approximated greedily.
"""

from __future__ import annotations

import itertools
from collections.abc import Callable, Collection, Sequence
from typing import NamedTuple

import numpy as np
from loguru import logger

from leoedgesim.strategies.schedule import NO_SATELLITE, ORIGIN
from leoedgesim.utils.type_hinting import FlatId, FloatArray, IntArray

CandidateSets = Sequence[frozenset[FlatId] | None]


def candidate_sets(
    latency_ms: FloatArray, tau: float | None = None, delta_ms: float | None = None
) -> list[frozenset[FlatId] | None]:
    """Acceptable satellites of every client.

    Args:
        latency_ms: One-way latencies (n_clients x n_satellites), NaN if absent
        tau: Accept satellites within (1 + tau) of the client's minimum latency
        delta_ms: Accept satellites within delta_ms of the client's minimum latency

    Returns:
        Candidate set per client, None for clients in a coverage gap
    """
    sets: list[frozenset[FlatId] | None] = []
    for latencies in latency_ms:
        if np.all(np.isnan(latencies)):
            sets.append(None)
            continue
        minimum = np.nanmin(latencies)
        bound = minimum + delta_ms if delta_ms is not None else (1.0 + (tau or 0.0)) * minimum
        with np.errstate(invalid="ignore"):
            sets.append(frozenset(np.flatnonzero(latencies <= bound).tolist()))
    return sets


def _rms(values: FloatArray) -> float:
    """Root-mean-square."""
    return float(np.sqrt(np.mean(np.square(values))))


def greedy_hitting_set(
    candidates: CandidateSets,
    latency_ms: FloatArray,
    incumbents: Collection[FlatId] = (),
) -> frozenset[FlatId]:
    """Greedy hitting set with incumbent retention.

    Incumbents that are a candidate of any client are kept. Then the satellite hitting the
    most unhit candidate sets is added until all are hit. Ties go to the lowest RMS latency
    over the newly covered clients, then to the lowest flat id.

    Args:
        candidates: Candidate set per client, None for clients to ignore
        latency_ms: One-way latencies (n_clients x n_satellites)
        incumbents: Current replicas

    Returns:
        Satellites hitting every candidate set
    """
    active = {i: c for i, c in enumerate(candidates) if c}
    universe = frozenset().union(*active.values()) if active else frozenset()

    chosen = {sat for sat in incumbents if sat in universe}
    uncovered = {i for i, c in active.items() if not c & chosen}

    while uncovered:
        hits: dict[FlatId, list[int]] = {}
        for client in uncovered:
            for sat in active[client]:
                hits.setdefault(sat, []).append(client)

        best = min(
            hits,
            key=lambda sat: (
                -len(hits[sat]),
                _rms(latency_ms[hits[sat], sat]),
                sat,
            ),
        )
        chosen.add(best)
        uncovered -= set(hits[best])

    return frozenset(chosen)


def optimal_hitting_set(candidates: CandidateSets) -> frozenset[FlatId]:
    """Smallest hitting set by exhaustive search.

    Exponential in the number of satellites, for verification on small instances only.

    Args:
        candidates: Candidate set per client, None for clients to ignore

    Returns:
        A minimum hitting set, the lexicographically smallest one of minimum size
    """
    active = [c for c in candidates if c]
    universe = sorted(frozenset().union(*active)) if active else []
    for size in range(len(universe) + 1):
        for subset in itertools.combinations(universe, size):
            chosen = frozenset(subset)
            if all(c & chosen for c in active):
                return chosen
    raise AssertionError("The union of all candidate sets is always a hitting set")


def assign_clients(replicas: Collection[FlatId], latency_ms: FloatArray) -> IntArray:
    """Lowest-latency replica of every client.

    Args:
        replicas: Replica set
        latency_ms: One-way latencies (n_clients x n_satellites)

    Returns:
        Satellite per client, NO_SATELLITE if no replica is reachable
    """
    assignment = np.full(latency_ms.shape[0], NO_SATELLITE, dtype=np.int64)
    if not replicas:
        return assignment

    sats = np.array(sorted(replicas), dtype=np.int64)
    latencies = latency_ms[:, sats]
    reachable = ~np.all(np.isnan(latencies), axis=1)
    if np.any(reachable):
        # nanargmin returns the first minimum, i.e. the lowest flat id on ties
        assignment[reachable] = sats[np.nanargmin(latencies[reachable], axis=1)]
    return assignment


class ManyToManySelection(NamedTuple):
    """Replica placement of a timestep.

    Attributes:
        replicas: Replica set
        assignment: Serving satellite per client, NO_SATELLITE in a coverage gap
        sources: Replication source of every new replica, ORIGIN without previous replicas
    """

    replicas: frozenset[FlatId]
    assignment: IntArray
    sources: dict[FlatId, FlatId]


def select_many_to_many(
    latency_ms: FloatArray,
    current_replicas: frozenset[FlatId],
    tau: float | None = None,
    delta_ms: float | None = None,
    handoff_delay: Callable[[FlatId, FlatId], float] | None = None,
) -> ManyToManySelection:
    """Place replicas for all clients.

    Args:
        latency_ms: One-way latencies (n_clients x n_satellites), NaN if absent
        current_replicas: Replicas of the previous timestep
        tau: Relative candidate bound
        delta_ms: Absolute candidate bound
        handoff_delay: Delay between two satellites, selects the replication source

    Returns:
        Replicas, assignment and sources of the new replicas
    """
    candidates = candidate_sets(latency_ms, tau, delta_ms)
    if gaps := [i for i, c in enumerate(candidates) if c is None]:
        logger.debug(f"{len(gaps)} client(s) without candidates excluded from the cover")

    chosen = greedy_hitting_set(candidates, latency_ms, current_replicas)

    # The lowest-latency member of the set is always one of the client's candidates
    assignment = assign_clients(chosen, latency_ms)
    # Only incumbents that serve nobody are torn down, the greedy cover is kept whole
    serving = frozenset(int(sat) for sat in assignment if sat != NO_SATELLITE)
    replicas = frozenset(
        sat for sat in chosen if sat in serving or sat not in current_replicas
    )

    sources: dict[FlatId, FlatId] = {}
    for sat in sorted(replicas - current_replicas):
        if not current_replicas:
            sources[sat] = ORIGIN
        elif handoff_delay is None:
            sources[sat] = min(current_replicas)
        else:
            sources[sat] = min(
                (handoff_delay(previous, sat), previous) for previous in current_replicas
            )[1]
    return ManyToManySelection(replicas, assignment, sources)
