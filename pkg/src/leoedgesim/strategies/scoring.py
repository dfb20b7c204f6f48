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
"""Satellite scores and hand-off delays."""

from collections.abc import Callable, Sequence

import numpy as np

from leoedgesim.strategies.schedule import Aggregation
from leoedgesim.topology import IslDelayOracle
from leoedgesim.traces import Trace
from leoedgesim.utils.type_hinting import FlatId, FloatArray, IntArray

# (step index, satellite a, satellite b) -> one-way delay in ms
HandoffDelay = Callable[[int, FlatId, FlatId], float]


def aggregate(latencies_ms: Sequence[float] | FloatArray, aggregation: Aggregation) -> float:
    """Aggregate client latencies.

    Args:
        latencies_ms: One-way latencies of the clients
        aggregation: Mean or root-mean-square

    Returns:
        Aggregated latency in ms
    """
    latencies_ms = np.asarray(latencies_ms, dtype=float)
    if latencies_ms.size == 0:
        raise ValueError("Can not aggregate an empty set of latencies")
    match Aggregation(aggregation):
        case Aggregation.MEAN:
            return float(np.mean(latencies_ms))
        case Aggregation.RMS:
            return float(np.sqrt(np.mean(latencies_ms**2)))


def scores(latency_ms: FloatArray, aggregation: Aggregation) -> FloatArray:
    """Scores of all satellites.

    Clients without any latency are in a coverage gap and excluded. A satellite that misses a
    latency to any covered client has no score.

    Args:
        latency_ms: One-way latencies (n_clients x n_satellites), NaN if absent
        aggregation: Mean or root-mean-square

    Returns:
        Score per satellite, NaN if undefined
    """
    latency_ms = np.atleast_2d(latency_ms)
    covered = latency_ms[~np.all(np.isnan(latency_ms), axis=1)]
    if covered.size == 0:
        return np.full(latency_ms.shape[-1], np.nan)

    # NaN propagates, so satellites missing a covered client stay undefined
    match Aggregation(aggregation):
        case Aggregation.MEAN:
            return np.mean(covered, axis=0)
        case Aggregation.RMS:
            return np.sqrt(np.mean(covered**2, axis=0))


def score(
    latency_ms: FloatArray, sat: FlatId, aggregation: Aggregation
) -> float | None:
    """Score of a single satellite.

    Args:
        latency_ms: One-way latencies (n_clients x n_satellites), NaN if absent
        sat: Satellite
        aggregation: Mean or root-mean-square

    Returns:
        Score in ms or None if undefined
    """
    value = scores(latency_ms, aggregation)[sat]
    return None if np.isnan(value) else float(value)


def argmin(values: FloatArray) -> FlatId | None:
    """Index of the minimum ignoring NaN, lowest index on ties, None if all NaN."""
    if np.all(np.isnan(values)):
        return None
    return int(np.nanargmin(values))


def score_series(
    trace: Trace, client_indices: IntArray, aggregation: Aggregation
) -> FloatArray:
    """Scores of all satellites at all timesteps for a group of clients.

    Args:
        trace: Trace
        client_indices: Clients served by the service
        aggregation: Mean or root-mean-square

    Returns:
        Scores (n_steps x n_satellites), NaN if undefined
    """
    series = np.full((len(trace.times), trace.n_satellites), np.nan)
    for step_index, frame in enumerate(trace.frames()):
        series[step_index] = scores(frame.latency_ms[client_indices], aggregation)
    return series


def handoff_delay_function(trace: Trace) -> HandoffDelay:
    """Delay between two satellites for hand-off tie-breaks.

    With a known scenario, the ISL shortest-path delay is used. Otherwise the delay is bounded
    from below by the largest latency difference any client sees between both satellites.

    Args:
        trace: Trace

    Returns:
        Hand-off delay function
    """
    if trace.config is not None:
        oracle = IslDelayOracle(trace.config.shell, trace.config.link)

        def isl_delay(step_index: int, a: FlatId, b: FlatId) -> float:
            """ISL shortest-path delay."""
            return oracle(float(trace.times[step_index]), a, b)

        return isl_delay

    def latency_difference(step_index: int, a: FlatId, b: FlatId) -> float:
        """Triangle lower bound of the ISL delay."""
        latency_ms = trace.frame(step_index).latency_ms
        difference = np.abs(latency_ms[:, a] - latency_ms[:, b])
        if np.all(np.isnan(difference)):
            return np.inf
        return float(np.nanmax(difference))

    return latency_difference
