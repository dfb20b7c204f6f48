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
"""MinMax and threshold selection."""

import math

from loguru import logger

from leoedgesim.strategies.schedule import StrategySpec
from leoedgesim.strategies.scoring import argmin
from leoedgesim.utils.type_hinting import FlatId, FloatArray


def select_minmax(scores: FloatArray) -> FlatId | None:
    """Satellite with the lowest score, lowest flat id on ties.

    Args:
        scores: Score per satellite, NaN if undefined

    Returns:
        Selected satellite, None in a total coverage gap
    """
    return argmin(scores)


def should_migrate(
    best_score: float,
    current_score: float,
    tau: float | None = None,
    delta_ms: float | None = None,
) -> bool:
    """Check the switching condition.

    Args:
        best_score: Score of the best satellite
        current_score: Score of the serving satellite
        tau: Relative improvement required
        delta_ms: Absolute improvement required

    Returns:
        True if the best satellite is sufficiently better
    """
    if delta_ms is not None:
        return best_score <= current_score - delta_ms
    return best_score <= (1.0 - (tau or 0.0)) * current_score


def select_threshold(
    scores: FloatArray, current: FlatId | None, spec: StrategySpec, t: int = 0
) -> FlatId | None:
    """Keep the serving satellite unless another one is sufficiently better.

    Args:
        scores: Score per satellite, NaN if undefined
        current: Serving satellite, None before bootstrap
        spec: Threshold strategy
        t: Timestep, only used for logging

    Returns:
        Selected satellite, None in a total coverage gap before bootstrap
    """
    best = argmin(scores)
    if best is None:
        return current
    if current is None:
        return best
    if current == best:
        return current

    current_score = float(scores[current])
    if math.isnan(current_score):
        logger.debug(f"t={t}: satellite {current} lost its score, re-selecting {best}")
        return best

    if should_migrate(float(scores[best]), current_score, spec.tau, spec.delta_ms):
        return best
    return current
