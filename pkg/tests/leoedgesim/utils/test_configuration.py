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
"""Test configuration utils."""

import pytest

from leoedgesim import CONFIG
from leoedgesim.utils.configuration import ConfigProfile, change_profile


def test_change_profile_failure():
    """Test for change profile failure."""
    with pytest.raises(KeyError, match="Profile"):
        change_profile("non-existing")


def test_default_profile():
    """Test the bundled defaults."""
    assert CONFIG.link["min_elevation_deg"] == 25.0
    assert set(CONFIG.cost_models) == {"container", "decoupled"}
    assert CONFIG.scenarios_path.is_dir()
    assert CONFIG.sites_path.is_dir()


def test_bundled_scenarios():
    """Test that the bundled scenarios are found by name."""
    assert {"single-plane", "single-client", "iot", "iot-1h", "cdn"} <= set(
        CONFIG.scenario_names
    )
    assert CONFIG.scenario_file("iot").name == "iot.yaml"


def test_unknown_scenario():
    """Test unknown scenario error lists the known ones."""
    with pytest.raises(KeyError, match="single-client"):
        CONFIG.scenario_file("mars")


def test_invalid_workers():
    """Test worker count check."""
    with pytest.raises(ValueError, match="workers"):
        ConfigProfile(
            name="broken",
            description="",
            scenarios_path="scenarios",
            sites_path="sites",
            workers=0,
        )


def test_missing_directory(tmp_path):
    """Test missing config directories."""
    with pytest.raises(FileNotFoundError, match="does not exist"):
        ConfigProfile(
            name="broken",
            description="",
            scenarios_path=tmp_path / "missing",
            sites_path="sites",
        )
