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
"""Test scenario loading and trace generation and io."""

import math
from dataclasses import replace

import numpy as np
import pytest

from leoedgesim.orbits import STARLINK_SHELL, GroundSite, SiteRole
from leoedgesim.topology import LinkModel
from leoedgesim.traces import (
    ScenarioConfig,
    candidate_columns,
    generate_trace,
    load_bundled_scenario,
    load_scenario,
    nearest_handoff_period,
    nearest_satellites,
    read_trace,
    trace_metadata_path,
    trace_table,
    write_trace,
)
from leoedgesim.utils.csv_io import CsvParseError
from leoedgesim.utils.validation import ValidationError

from .trace_builder import dense_trace

NAN = np.nan


@pytest.fixture(name="redmond_scenario")
def fixture_redmond_scenario():
    """Three seconds of a single Redmond client under the Starlink shell."""
    return ScenarioConfig(
        shell=STARLINK_SHELL,
        link=LinkModel(),
        sites=[GroundSite("redmond", 47.67, -122.12)],
        duration_s=3,
        name="redmond",
    )


def test_scenario_checks():
    """Test scenario invariants."""
    site = GroundSite("a", 0.0, 0.0)
    with pytest.raises(ValueError, match="shorter than the timestep"):
        ScenarioConfig(STARLINK_SHELL, LinkModel(), [site], duration_s=5, step_s=10)
    with pytest.raises(ValueError, match="Duplicate"):
        ScenarioConfig(STARLINK_SHELL, LinkModel(), [site, site], duration_s=5)
    with pytest.raises(ValueError, match="candidates"):
        ScenarioConfig(STARLINK_SHELL, LinkModel(), [site], duration_s=5, candidates_only=0)


def test_scenario_roles():
    """Test that only clients are traced, sorted by id."""
    config = ScenarioConfig(
        STARLINK_SHELL,
        LinkModel(),
        [
            GroundSite("b", 0.0, 0.0),
            GroundSite("origin", 1.0, 1.0, role=SiteRole.ORIGIN),
            GroundSite("a", 0.0, 1.0),
        ],
        duration_s=4,
        step_s=2,
    )
    assert [site.site_id for site in config.clients] == ["a", "b"]
    assert config.origin.site_id == "origin"
    assert config.times.tolist() == [0, 2]
    assert ScenarioConfig.from_dict(config.to_dict()) == config


def test_load_bundled_scenarios():
    """Test that every bundled scenario loads."""
    single_client = load_bundled_scenario("single-client")
    assert [site.site_id for site in single_client.clients] == ["redmond"]
    assert single_client.shell == replace(STARLINK_SHELL, phase_offset=22)
    assert single_client.link.attachment == "multi_homed"
    assert len(single_client.strategies) == 4

    iot = load_bundled_scenario("iot")
    assert len(iot.clients) == 30
    assert iot.ramp_up_s == 120
    assert iot.cardinality == "many_to_one"
    assert iot.link.attachment == "multi_homed"

    cdn = load_bundled_scenario("cdn")
    assert len(cdn.clients) == 50
    assert cdn.origin.site_id == "umatilla"
    assert cdn.link.attachment == "multi_homed"

    assert load_bundled_scenario("iot-1h").duration_s == 3720
    assert load_bundled_scenario("single-plane").shell.n_satellites == 22


def test_load_scenario_with_seed():
    """Test that jitter moves clients but keeps the other sites."""
    plain = load_bundled_scenario("cdn")
    jittered = load_bundled_scenario("cdn", seed=7)

    assert jittered.origin == plain.origin
    assert [site.site_id for site in jittered.clients] == [site.site_id for site in plain.clients]
    assert jittered.clients != plain.clients
    assert load_bundled_scenario("cdn", seed=7).clients == jittered.clients


def test_load_scenario_relative_files(tmp_path):
    """Test shell and sites files next to the scenario."""
    (tmp_path / "shell.toml").write_text(
        "planes = 2\nsats_per_plane = 3\naltitude_km = 600.0\ninclination_deg = 70.0\n"
    )
    (tmp_path / "sites.csv").write_text(
        "site_id,latitude_deg,longitude_deg,altitude_km,role\nhere,10.0,20.0,0.0,client\n"
    )
    path = tmp_path / "scenario.yaml"
    path.write_text(
        "shell: shell.toml\nsites: sites.csv\nduration_s: 10\nlink:\n  min_elevation_deg: 10.0\n"
    )

    config = load_scenario(path)
    assert config.name == "scenario"
    assert config.shell.n_satellites == 6
    assert config.link.min_elevation_deg == 10.0
    assert config.sites == [GroundSite("here", 10.0, 20.0)]


def test_invalid_scenario(tmp_path):
    """Test scenario schema validation."""
    path = tmp_path / "scenario.yaml"
    path.write_text("shell: shell.yaml\nsites: sites.csv\nduration_s: -1\n")
    with pytest.raises(ValidationError, match="duration_s"):
        load_scenario(path)


def test_candidate_columns():
    """Test per-client and aggregate candidate filters."""
    latency_ms = np.array(
        [
            [1.0, 5.0, 3.0, 9.0],
            [9.0, 5.0, 3.0, 1.0],
        ]
    )
    assert candidate_columns(latency_ms, None, None).tolist() == [0, 1, 2, 3]
    assert candidate_columns(latency_ms, 1, None).tolist() == [0, 3]
    # Mean and RMS both favor the central satellites 2 (3.0) and then 1 (5.0)
    assert candidate_columns(latency_ms, None, 1).tolist() == [2]
    assert candidate_columns(latency_ms, 1, 1).tolist() == [0, 2, 3]


def test_generate_trace(redmond_scenario):
    """Test a full trace of one client."""
    trace = generate_trace(redmond_scenario, workers=1)

    assert trace.clients == ["redmond"]
    assert trace.times.tolist() == [0, 1, 2]
    assert trace.n_rows == 3 * STARLINK_SHELL.n_satellites
    assert not trace.gaps()
    assert np.all(trace.one_way_us >= 1)

    frame = trace.frame(0)
    assert frame.latency_ms.shape == (1, STARLINK_SHELL.n_satellites)
    # The nearest satellite is at least at shell altitude and within the elevation mask range
    assert 550.0 / 299.792458 <= np.min(frame.latency_ms) < 1.2e3 / 299.792458


def test_generate_trace_candidates(redmond_scenario):
    """Test that the candidate filter keeps the nearest satellites."""
    full = generate_trace(redmond_scenario, workers=1)
    filtered = generate_trace(redmond_scenario, workers=1, candidates_only=4)

    assert filtered.n_rows == 3 * 4
    for full_frame, filtered_frame in zip(full.frames(), filtered.frames()):
        expected = np.sort(full_frame.latency_ms[0])[:4]
        kept = filtered_frame.latency_ms[0]
        np.testing.assert_allclose(np.sort(kept[~np.isnan(kept)]), expected)


def test_generate_trace_workers(redmond_scenario):
    """Test that worker processes produce the same trace."""
    assert generate_trace(redmond_scenario, workers=2, candidates_only=8) == generate_trace(
        redmond_scenario, workers=1, candidates_only=8
    )


def test_generate_empty_trace(redmond_scenario):
    """Test a zero-duration scenario."""
    redmond_scenario.duration_s = 0
    trace = generate_trace(redmond_scenario, workers=1)
    assert len(trace.times) == 0
    assert trace.n_rows == 0


def test_trace_frames_and_gaps():
    """Test dense frames and coverage gaps."""
    trace = dense_trace(
        [
            [[1.0, NAN], [NAN, NAN]],
            [[2.0, 3.0], [4.0, NAN]],
        ]
    )
    assert trace.gaps() == {(0, "c1")}

    frame = trace.frame(1)
    assert frame.t == 1
    np.testing.assert_array_equal(frame.latency_ms, [[2.0, 3.0], [4.0, NAN]])
    assert trace.frame(0).covered.tolist() == [True, False]


def test_trace_table_gap_rows():
    """Test that gaps are encoded in the table."""
    trace = dense_trace([[[NAN], [1.5]]], clients=["a", "b"])
    table = trace_table(trace)
    assert table.values.tolist() == [[0, "a", -1, 0], [0, "b", 0, 1500]]


def test_trace_roundtrip(tmp_path, redmond_scenario):
    """Test trace io with and without sidecar."""
    trace = generate_trace(redmond_scenario, workers=1, candidates_only=3)
    path = write_trace(trace, tmp_path / "trace.csv")

    reloaded = read_trace(path)
    assert reloaded == trace
    assert reloaded.config.name == "redmond"
    assert reloaded.config.shell == STARLINK_SHELL
    assert reloaded.config.candidates_only == 3

    gappy = dense_trace([[[NAN, 2.0]], [[NAN, NAN]], [[1.0, NAN]]], clients=["x"])
    path = write_trace(gappy, tmp_path / "gappy.csv")
    trace_metadata_path(path).unlink()
    assert read_trace(path) == gappy


def test_header_only_trace(tmp_path):
    """Test an empty trace without sidecar."""
    path = tmp_path / "trace.csv"
    path.write_text("t_s,site_id,sat_id,one_way_us\n")
    trace = read_trace(path)
    assert trace.n_clients == 0
    assert len(trace.times) == 0


@pytest.mark.parametrize(
    "rows, line, match",
    [
        ("0,x,1,2000\n0,x,2,-5\n", 3, "invalid trace row"),
        ("0,x,1,2000\n1,x,-1,7\n", 3, "invalid trace row"),
        ("0,x,1,2000\n0,y,1,1000\n", 3, "unknown clients"),
        ("0,x,1,2000\n0,x,9,1000\n", 3, "outside a shell"),
        ("0,x,one,2000\n", 2, "invalid value"),
    ],
)
def test_trace_parse_errors(tmp_path, rows, line, match):
    """Test that malformed traces report the line."""
    path = write_trace(dense_trace([[[1.0, 2.0]]], clients=["x"]), tmp_path / "trace.csv")
    path.write_text("t_s,site_id,sat_id,one_way_us\n" + rows)

    with pytest.raises(CsvParseError, match=match) as exception:
        read_trace(path)
    assert exception.value.line == line


def test_nearest_handoff_period():
    """Test the mean period between nearest-satellite changes."""
    # Nearest satellite: 0 0 1 1 0 0 0 0 1
    nearest = [0, 0, 1, 1, 0, 0, 0, 0, 1]
    latency_ms = [[[1.0 if sat == best else 2.0 for sat in range(2)]] for best in nearest]
    trace = dense_trace(latency_ms)

    assert [sat for _, sat in nearest_satellites(trace, "c0")] == nearest
    # Changes at t = 2, 4, 8
    assert nearest_handoff_period(trace, "c0") == pytest.approx(3.0)


def test_nearest_handoff_period_without_changes():
    """Test the degenerate case of a constant nearest satellite."""
    trace = dense_trace([[[1.0, 2.0]]] * 5)
    assert math.isnan(nearest_handoff_period(trace, "c0"))
