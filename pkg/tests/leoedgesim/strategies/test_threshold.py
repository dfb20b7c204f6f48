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
"""Test MinMax and threshold selection."""

import numpy as np
import pytest

from leoedgesim.strategies.schedule import StrategySpec
from leoedgesim.strategies.threshold import select_minmax, select_threshold, should_migrate

NAN = np.nan


@pytest.mark.parametrize(
    "best, current, tau, delta_ms, expected",
    [
        (4.6, 5.0, 0.10, None, False),
        (4.4, 5.0, 0.10, None, True),
        (4.5, 5.0, 0.10, None, True),
        (4.999, 5.0, 0.0, None, True),
        (4.0, 5.0, None, 1.0, True),
        (4.1, 5.0, None, 1.0, False),
    ],
)
def test_should_migrate(best, current, tau, delta_ms, expected):
    """Test the switching condition arithmetic."""
    assert should_migrate(best, current, tau, delta_ms) is expected


def test_select_minmax():
    """Test the lowest score with ties to the lowest flat id."""
    assert select_minmax(np.array([3.0, 1.0, 1.0])) == 1
    assert select_minmax(np.array([NAN, NAN])) is None


@pytest.fixture(name="spec")
def fixture_spec():
    """10 percent threshold strategy."""
    return StrategySpec(kind="threshold", tau=0.10)


def test_threshold_bootstrap(spec):
    """Test that the first selection takes the best satellite."""
    assert select_threshold(np.array([5.0, 4.0]), None, spec) == 1


def test_threshold_keeps_current(spec):
    """Test that small improvements are ignored."""
    assert select_threshold(np.array([5.0, 4.6]), 0, spec) == 0
    assert select_threshold(np.array([5.0, 4.4]), 0, spec) == 1


def test_threshold_lost_current(spec):
    """Test the forced migration if the serving satellite lost its score."""
    assert select_threshold(np.array([NAN, 4.9, 4.8]), 0, spec) == 2


def test_threshold_total_gap(spec):
    """Test that a total gap keeps the serving satellite."""
    assert select_threshold(np.array([NAN, NAN]), 1, spec) == 1
    assert select_threshold(np.array([NAN, NAN]), None, spec) is None


def test_threshold_zero_is_minmax():
    """Test that a zero threshold always follows the minimum."""
    spec = StrategySpec(kind="threshold", tau=0.0)
    rng = np.random.default_rng(1)
    current = None
    for _ in range(100):
        values = rng.uniform(1.0, 10.0, size=6)
        current = select_threshold(values, current, spec)
        assert current == select_minmax(values)
