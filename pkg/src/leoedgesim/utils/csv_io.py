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
"""CSV io.

All tabular artifacts (sites, traces, schedules, timelines, metrics) are plain CSV files with a
fixed header. Reading validates every cell and reports the first malformed line.
"""

import pathlib
from collections.abc import Collection

import pandas as pd
import regex
from loguru import logger

from leoedgesim.utils.type_hinting import Path

_INT_PATTERN = regex.compile(r"-?[0-9]+")


class CsvParseError(ValueError):
    """Malformed CSV file."""

    def __init__(self, path: Path, line: int, reason: str) -> None:
        """Initialise error.

        Args:
            path: File that failed to parse
            line: 1-based line number, the header is line 1
            reason: What is wrong with the line
        """
        self.path = pathlib.Path(path)
        self.line = line
        super().__init__(f"{self.path}, line {line}: {reason}")


def _first_bad_line(valid: pd.Series) -> int | None:
    """Return the 1-based file line of the first invalid entry, if any."""
    if valid.all():
        return None
    # +2: header line and 1-based counting
    return int(valid.index[~valid.to_numpy()][0]) + 2


def read_csv_table(
    path: Path, columns: dict[str, type], may_be_empty: Collection[str] = ()
) -> pd.DataFrame:
    """Read a CSV file with an exact header.

    Args:
        path: CSV file path
        columns: Expected column names in order mapped to int, float or str
        may_be_empty: str columns that accept empty cells

    Returns:
        Table with the requested dtypes
    """
    path = pathlib.Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"File '{path}' does not exist.")

    try:
        table = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False)
    except pd.errors.EmptyDataError as exception:
        raise CsvParseError(path, 1, "missing header") from exception
    except pd.errors.ParserError as exception:
        line_match = regex.search(r"line (\d+)", str(exception))
        line = int(line_match.group(1)) if line_match else 0
        raise CsvParseError(path, line, str(exception)) from exception

    if list(table.columns) != list(columns):
        raise CsvParseError(
            path,
            1,
            f"expected header '{','.join(columns)}', got '{','.join(table.columns)}'",
        )

    # Blank lines are kept as rows so line numbers stay aligned with the file
    blank = pd.Series(True, index=table.index)
    for name in table.columns:
        blank &= table[name].fillna("").str.strip() == ""
    if (line := _first_bad_line(~blank)) is not None:
        raise CsvParseError(path, line, "blank line")

    converted = {}
    for name, dtype in columns.items():
        column = table[name].str.strip()
        if dtype is int:
            valid = column.map(
                lambda value: isinstance(value, str) and _INT_PATTERN.fullmatch(value) is not None
            ).astype(bool)
            values = pd.to_numeric(column.where(valid, "0")).astype("int64")
        elif dtype is float:
            values = pd.to_numeric(column, errors="coerce")
            valid = values.notna()
        else:
            values = column
            valid = (
                pd.Series(True, index=column.index) if name in may_be_empty else column != ""
            )

        if (line := _first_bad_line(valid)) is not None:
            raise CsvParseError(
                path, line, f"invalid value '{table[name].iloc[line - 2]}' for '{name}'"
            )
        converted[name] = values

    logger.debug(f"Read {len(table)} rows from {path}")
    return pd.DataFrame(converted, columns=list(columns))


def write_csv_table(table: pd.DataFrame, path: Path) -> pathlib.Path:
    """Write a table as CSV without index.

    Args:
        table: Table to write
        path: Output path, parent directories are created

    Returns:
        Written path
    """
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, lineterminator="\n")
    logger.debug(f"Wrote {len(table)} rows to {path}")
    return path
