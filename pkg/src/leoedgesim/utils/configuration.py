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
"""Configuration utils."""

from __future__ import annotations

import pathlib
from dataclasses import dataclass, field

from loguru import logger

from leoedgesim.utils.type_hinting import Path
from leoedgesim.utils.yaml_io import dump_yaml, load_yaml

CONFIG_PACKAGE: pathlib.Path = pathlib.Path(__file__).parents[1] / "config"
CONFIG_FILE: pathlib.Path = CONFIG_PACKAGE / "config.yaml"


def _resolve(path: Path) -> pathlib.Path:
    """Resolve a path relative to the config package."""
    path = pathlib.Path(path)
    if not path.is_absolute():
        # Assumption: Path is relative to LEOEdgeSim config package
        logger.debug(
            f"Path {path} is a relative path. The absolute path is set to {CONFIG_PACKAGE / path}"
        )
        path = CONFIG_PACKAGE / path
    return path


@dataclass
class ConfigProfile:
    """LEOEdgeSim configuration profile.

    Attributes:
        name: Name of the configuration profile
        description: Description of the profile
        scenarios_path: Directory of the bundled scenario files
        sites_path: Directory of the bundled site lists
        link: Default link model parameters
        cost_models: Migration cost model parameters by mode name
        lead_time_s: Default replication lead time
        payload_mb: Default replicated payload
        candidates_only: Default per-client candidate limit for traces, None keeps all
        workers: Default number of worker processes for trace generation and sweeps
    """

    name: str
    description: str
    scenarios_path: Path
    sites_path: Path
    link: dict = field(default_factory=dict)
    cost_models: dict = field(default_factory=dict)
    lead_time_s: float = 20.0
    payload_mb: float = 0.0
    candidates_only: int | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        """Resolve paths."""
        self.scenarios_path = _resolve(self.scenarios_path)
        self.sites_path = _resolve(self.sites_path)

        for directory in (self.scenarios_path, self.sites_path):
            if not directory.is_dir():
                raise FileNotFoundError(f"Config directory '{directory}' does not exist.")

        if self.workers < 1:
            raise ValueError(f"Number of workers has to be positive, got {self.workers}")

    @property
    def scenario_names(self) -> list[str]:
        """Names of the bundled scenarios."""
        return sorted(path.stem for path in self.scenarios_path.glob("*.yaml"))

    def scenario_file(self, name: str) -> pathlib.Path:
        """Path of a bundled scenario.

        Args:
            name: Scenario name, e.g. 'iot'

        Returns:
            Scenario file path
        """
        path = self.scenarios_path / f"{name}.yaml"
        if not path.is_file():
            raise KeyError(
                f"Scenario '{name}' unknown. Known scenarios are: {', '.join(self.scenario_names)}"
            )
        return path

    def __str__(self) -> str:
        """String method for the config."""

        def add_keyword(name: str, data: object) -> str:
            """Create keyword description line."""
            return f"\n - {name}: {data}"

        s = f"LEOEdgeSim configuration '{self.name}'"
        s += add_keyword("Configuration file", CONFIG_FILE)
        s += add_keyword("Description", self.description)
        s += add_keyword("Scenarios path", self.scenarios_path)
        s += add_keyword("Sites path", self.sites_path)
        s += add_keyword("Link model", self.link)
        s += add_keyword("Cost models", ", ".join(self.cost_models))
        s += add_keyword("Lead time [s]", self.lead_time_s)
        s += add_keyword("Workers", self.workers)

        return s


def load_config() -> ConfigProfile:
    """Load the active config profile.

    Returns:
        user config.
    """
    config_data: dict = load_yaml(CONFIG_FILE)
    profile_name = config_data["profile"]
    profile = config_data["profiles"][profile_name]
    logger.debug(f"Reading config profile {profile}")

    config = ConfigProfile(name=profile_name, **profile)
    logger.debug(config)
    return config


def change_profile(profile: str) -> None:
    """Change config profile.

    Args:
        profile: Profile name to set
    """
    config_data: dict = load_yaml(CONFIG_FILE)

    if profile not in config_data["profiles"]:
        known_profiles = ", ".join(config_data["profiles"])
        raise KeyError(
            f"Profile {profile} unknown. Known profiles are: {known_profiles}"
        )
    config_data["profile"] = profile
    logger.info(f"Changing to config profile '{profile}'")
    dump_yaml(config_data, CONFIG_FILE, compact_vectors=False)


def show_config() -> None:
    """Show LEOEdgeSim config."""
    logger.info("LEOEdgeSim configuration")
    logger.info(f"  Config file: {CONFIG_FILE.resolve()}")
    logger.info("  Contents:")
    logger.info("    " + "\n    ".join(CONFIG_FILE.read_text().split("\n")))
