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
"""YAML io."""

import json
import pathlib
import tomllib
from typing import Callable

import regex
import ryml

from leoedgesim.utils.type_hinting import Path


def load_yaml(path_to_yaml_file: Path) -> dict:
    """Load yaml (or json) files.

    rapidyaml returns custom objects, so the tree is emitted as json and read in using the json
    library. JSON files are valid YAML and take the same route.

    Args:
        path_to_yaml_file: Path to yaml file

    Returns:
       Loaded data
    """

    json_str = ryml.emit_json(
        ryml.parse_in_arena(pathlib.Path(path_to_yaml_file).read_bytes())
    )

    # Convert `inf` to a string to avoid JSON parsing errors, see https://github.com/biojppm/rapidyaml/issues/312
    json_str = regex.sub(r":\s*(-?)inf\b", r': "\1inf"', json_str)

    # Convert floats that are missing digits on either side of the decimal point
    # so .5 to 0.5 and 5. to 5.0
    json_str = regex.sub(r":\s*(-?)\.([0-9]+)", r": \g<1>0.\2", json_str)
    json_str = regex.sub(r":\s*(-?)([0-9]+)\.(\D)", r": \1\2.0\3", json_str)

    return json.loads(json_str)


def load_structured_file(path: Path) -> dict:
    """Load a shell or scenario description from YAML, JSON or TOML.

    Args:
        path: File path, the suffix selects the parser

    Returns:
        Loaded data
    """
    path = pathlib.Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"File '{path}' does not exist.")

    if path.suffix.lower() == ".toml":
        with path.open("rb") as stream:
            return tomllib.load(stream)
    return load_yaml(path)


def _is_numeric_sequence(tree: ryml.Tree, node_id: int) -> bool:
    """Check if a sequence holds only numbers or sequences thereof.

    Args:
        tree: Tree to check
        node_id: Node id

    Returns:
        True if the entry is a numeric vector
    """
    for sub_node, _ in ryml.walk(tree, node_id):
        if sub_node == node_id:
            continue

        if tree.is_map(sub_node):
            return False

        if tree.is_seq(sub_node):
            if not _is_numeric_sequence(tree, sub_node):
                return False
            continue

        val = tree.val(sub_node).tobytes().decode("ascii")
        if (
            tree.is_val_quoted(sub_node)
            or tree.val_is_null(sub_node)
            or val in ("true", "false")
        ):
            return False

    return True


def dict_to_yaml_string(
    data: dict,
    sort_function: Callable[[dict], dict] | None = None,
    compact_vectors: bool = True,
) -> str:
    """Dump dict as yaml.

    With compact vectors, numeric sequences such as per-second replica counts are emitted in flow
    style, i.e. on a single line.

    Args:
        data: Data to dump.
        sort_function: Function to sort the data.
        compact_vectors: Emit numeric sequences in flow style

    Returns:
        YAML string representation of the data
    """

    if sort_function is not None:
        data = sort_function(data)

    tree = ryml.parse_in_arena(bytearray(json.dumps(data).encode("utf8")))

    # Change style bits to avoid JSON output, see https://github.com/biojppm/rapidyaml/issues/520
    for node_id, depth in ryml.walk(tree):
        if tree.is_map(node_id):
            tree.set_container_style(node_id, ryml.NOTYPE)
        elif tree.is_seq(node_id):
            if (
                not compact_vectors
                or depth == 1
                or not _is_numeric_sequence(tree, node_id)
            ):
                tree.set_container_style(node_id, ryml.NOTYPE)

        if tree.has_key(node_id):
            tree.set_key_style(node_id, ryml.NOTYPE)

    yaml_string = ryml.emit_yaml(tree)

    if compact_vectors:
        # add spaces after commas in vectors
        yaml_string = regex.sub(r"(?<=\d),(?=\d)|(?<=\]),(?=\[)", ", ", yaml_string)

    return yaml_string


def dump_yaml(
    data: dict,
    path_to_yaml_file: Path,
    sort_function: Callable[[dict], dict] | None = None,
    compact_vectors: bool = True,
) -> None:
    """Dump yaml to file.

    Args:
        data: Data to dump.
        path_to_yaml_file: Yaml file path
        sort_function: Function to sort the data
        compact_vectors: Emit numeric sequences in flow style
    """
    pathlib.Path(path_to_yaml_file).write_text(
        dict_to_yaml_string(data, sort_function, compact_vectors),
        encoding="utf-8",
    )
