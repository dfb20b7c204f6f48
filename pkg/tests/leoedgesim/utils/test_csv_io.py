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
"""Test csv io utils."""

import pandas as pd
import pytest

from leoedgesim.utils.csv_io import CsvParseError, read_csv_table, write_csv_table

COLUMNS = {"t_s": int, "site_id": str, "one_way_ms": float}


def test_write_and_read_table(tmp_path):
    """Test that dtypes and values survive the file."""
    table = pd.DataFrame(
        {"t_s": [0, 1], "site_id": ["a", "b"], "one_way_ms": [1.5, 2.25]},
        columns=list(COLUMNS),
    )
    path = write_csv_table(table, tmp_path / "nested" / "table.csv")

    reloaded = read_csv_table(path, COLUMNS)
    pd.testing.assert_frame_equal(reloaded, table)


def test_header_only_table(tmp_path):
    """Test that a header-only file is an empty table."""
    path = tmp_path / "empty.csv"
    path.write_text("t_s,site_id,one_way_ms\n")

    table = read_csv_table(path, COLUMNS)
    assert table.empty
    assert list(table.columns) == list(COLUMNS)


@pytest.mark.parametrize(
    "content, line",
    [
        ("t_s,site_id,one_way_ms\n0,a,1.0\n1.5,b,2.0\n", 3),
        ("t_s,site_id,one_way_ms\n0,a,1.0\n1,b,2.0\n2,c,fast\n", 4),
        ("t_s,site_id,one_way_ms\n0,,1.0\n", 2),
        ("t,site_id,one_way_ms\n0,a,1.0\n", 1),
        ("", 1),
        ("t_s,site_id,one_way_ms\n0,a,1.0\n\n1,b,2.0\n", 3),
        ("t_s,site_id,one_way_ms\n\n  \n0,a,1.0\n", 2),
        ("t_s,site_id,one_way_ms\n0,a,1.0\n1,b,2.0\n,,\n", 4),
        ("t_s,site_id,one_way_ms\n0,a,1.0\n0x1,b,2.0\n", 3),
    ],
)
def test_parse_error_line(tmp_path, content, line):
    """Test that the first malformed line is reported."""
    path = tmp_path / "bad.csv"
    path.write_text(content)

    with pytest.raises(CsvParseError, match=f"line {line}") as exception:
        read_csv_table(path, COLUMNS)
    assert exception.value.line == line


def test_may_be_empty(tmp_path):
    """Test that selected str columns accept empty cells."""
    path = tmp_path / "replicas.csv"
    path.write_text("t_s,replicas\n0,\n1,3;4\n")

    table = read_csv_table(path, {"t_s": int, "replicas": str}, may_be_empty=("replicas",))
    assert table["replicas"].tolist() == ["", "3;4"]


def test_missing_file(tmp_path):
    """Test missing file error."""
    with pytest.raises(FileNotFoundError, match="does not exist"):
        read_csv_table(tmp_path / "missing.csv", COLUMNS)
