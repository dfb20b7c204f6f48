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
"""Sticky selection.

Among the near-optimal satellites pick the one that stays near-optimal for the longest time,
then the one closest to the serving satellite.
"""

import numpy as np

from leoedgesim.strategies.scoring import HandoffDelay
from leoedgesim.utils.type_hinting import FlatId, FloatArray


def candidate_bands(score_series: FloatArray, margin: float) -> np.ndarray:
    """Near-optimal satellites at every timestep.

    Args:
        score_series: Scores (n_steps x n_satellites), NaN if undefined
        margin: Band width relative to the minimum score

    Returns:
        Membership mask (n_steps x n_satellites)
    """
    bands = np.zeros(score_series.shape, dtype=bool)
    defined = ~np.all(np.isnan(score_series), axis=1)
    if np.any(defined):
        minimum = np.nanmin(score_series[defined], axis=1, keepdims=True)
        with np.errstate(invalid="ignore"):
            bands[defined] = score_series[defined] <= (1.0 + margin) * minimum
    return bands


def persistence(bands: np.ndarray, step_index: int, sats: np.ndarray) -> np.ndarray:
    """Number of consecutive timesteps from step_index the satellites stay in the band."""
    future = bands[step_index:, sats]
    leaves = ~future
    # argmax finds the first exit, satellites that never leave persist until the trace ends
    return np.where(leaves.any(axis=0), leaves.argmax(axis=0), future.shape[0])


def select_sticky(
    bands: np.ndarray,
    step_index: int,
    current: FlatId | None,
    handoff_delay: HandoffDelay,
) -> FlatId | None:
    """Select the longest-lasting near-optimal satellite.

    Args:
        bands: Near-optimal membership (n_steps x n_satellites)
        step_index: Current timestep index
        current: Serving satellite, None at bootstrap
        handoff_delay: Delay between satellites for the tie-break

    Returns:
        Selected satellite, the current one in a coverage gap
    """
    candidates = np.flatnonzero(bands[step_index])
    if candidates.size == 0:
        return current
    if candidates.size == 1:
        return int(candidates[0])

    durations = persistence(bands, step_index, candidates)
    longest = candidates[durations == durations.max()]
    if longest.size == 1 or current is None:
        return int(longest[0])

    # Tuples sort by delay first and lowest flat id second
    return min((handoff_delay(step_index, current, int(sat)), int(sat)) for sat in longest)[1]
