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
"""Circular-orbit propagation of Walker shells.

Spherical Earth, two-body circular orbits, no perturbations. Positions are expressed in an
Earth-centered Earth-fixed (ECEF) frame in kilometers. At an effective time of zero the
ascending node of plane 0 is aligned with longitude 0.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from loguru import logger

from leoedgesim.utils.csv_io import read_csv_table
from leoedgesim.utils.type_hinting import FloatArray, Path
from leoedgesim.utils.validation import load_schema, validate_using_json_schema
from leoedgesim.utils.yaml_io import load_structured_file

R_EARTH_KM = 6371.0
MU_EARTH_KM3_S2 = 398600.4418
OMEGA_EARTH_RAD_S = 7.2921159e-5

MIN_ALTITUDE_KM = 300.0
MAX_ALTITUDE_KM = 2000.0

SITES_COLUMNS = {
    "site_id": str,
    "latitude_deg": float,
    "longitude_deg": float,
    "altitude_km": float,
    "role": str,
}


class DomainError(ValueError):
    """Physical parameter outside its valid domain."""


def _check_altitude(altitude_km: float) -> None:
    """Check the shell altitude bounds."""
    if not MIN_ALTITUDE_KM <= altitude_km <= MAX_ALTITUDE_KM:
        raise DomainError(
            f"Altitude {altitude_km} km outside [{MIN_ALTITUDE_KM}, {MAX_ALTITUDE_KM}] km"
        )


def orbital_period(altitude_km: float, check_bounds: bool = True) -> float:
    """Orbital period of a circular orbit.

    Kepler's third law, T = 2 pi sqrt(a^3 / mu) with a = R_earth + altitude.

    Args:
        altitude_km: Altitude above the mean Earth radius
        check_bounds: Reject altitudes outside the LEO shell bounds

    Returns:
        Period in seconds
    """
    if check_bounds:
        _check_altitude(altitude_km)
    elif altitude_km < -R_EARTH_KM:
        raise DomainError(f"Altitude {altitude_km} km is below the Earth's center")

    semi_major_axis = R_EARTH_KM + altitude_km
    return 2.0 * math.pi * math.sqrt(semi_major_axis**3 / MU_EARTH_KM3_S2)


@dataclass(frozen=True)
class ShellSpec:
    """Walker-style shell.

    Attributes:
        planes: Number of orbital planes
        sats_per_plane: Satellites per plane
        altitude_km: Altitude above the mean Earth radius
        inclination_deg: Orbit inclination
        phase_offset: Walker phasing parameter F, 0 <= F < planes
        raan_spread_deg: Total right ascension spread of the planes
        epoch_offset_s: Seconds added to all propagation times
    """

    planes: int
    sats_per_plane: int
    altitude_km: float
    inclination_deg: float
    phase_offset: int = 0
    raan_spread_deg: float = 360.0
    epoch_offset_s: float = 0.0

    def __post_init__(self) -> None:
        """Check invariants."""
        if self.planes < 1 or self.sats_per_plane < 1:
            raise DomainError(
                f"A shell needs at least one plane and one satellite per plane, got "
                f"{self.planes} x {self.sats_per_plane}"
            )
        _check_altitude(self.altitude_km)
        if not 0.0 < self.inclination_deg <= 180.0:
            raise DomainError(f"Inclination {self.inclination_deg} deg outside (0, 180]")
        if not 0 <= self.phase_offset < self.planes:
            raise DomainError(
                f"Phasing F={self.phase_offset} outside [0, {self.planes - 1}]"
            )
        if not 0.0 < self.raan_spread_deg <= 360.0:
            raise DomainError(f"RAAN spread {self.raan_spread_deg} deg outside (0, 360]")

    @property
    def n_satellites(self) -> int:
        """Total number of satellites."""
        return self.planes * self.sats_per_plane

    @property
    def radius_km(self) -> float:
        """Orbit radius."""
        return R_EARTH_KM + self.altitude_km

    @property
    def period_s(self) -> float:
        """Orbital period."""
        return orbital_period(self.altitude_km)

    def to_dict(self) -> dict:
        """Shell as dict with the file keys."""
        return {
            "planes": self.planes,
            "sats_per_plane": self.sats_per_plane,
            "altitude_km": self.altitude_km,
            "inclination_deg": self.inclination_deg,
            "phase_offset": self.phase_offset,
            "raan_spread_deg": self.raan_spread_deg,
            "epoch_offset_s": self.epoch_offset_s,
        }

    @classmethod
    def from_dict(cls, data: dict, source: str = "") -> ShellSpec:
        """Create a shell from file data.

        Args:
            data: Shell data with the file keys
            source: Name of the source, used in error messages

        Returns:
            Shell
        """
        validate_using_json_schema(data, load_schema("shell"), source)
        return cls(**data)


# First shell of the phase I Starlink constellation, 1,584 satellites
STARLINK_SHELL = ShellSpec(
    planes=72, sats_per_plane=22, altitude_km=550.0, inclination_deg=53.0, phase_offset=39
)


class SatelliteId(NamedTuple):
    """Satellite identifier within a shell."""

    plane_index: int
    slot_index: int
    flat_id: int

    @classmethod
    def from_flat(cls, spec: ShellSpec, flat_id: int) -> SatelliteId:
        """Create id from the flat id.

        Args:
            spec: Shell
            flat_id: plane_index * sats_per_plane + slot_index

        Returns:
            Satellite id
        """
        if not 0 <= flat_id < spec.n_satellites:
            raise KeyError(f"Satellite {flat_id} not in a shell of {spec.n_satellites}")
        plane_index, slot_index = divmod(flat_id, spec.sats_per_plane)
        return cls(plane_index, slot_index, flat_id)

    @classmethod
    def from_plane_slot(
        cls, spec: ShellSpec, plane_index: int, slot_index: int
    ) -> SatelliteId:
        """Create id from plane and slot, both wrap around."""
        plane_index %= spec.planes
        slot_index %= spec.sats_per_plane
        return cls(plane_index, slot_index, plane_index * spec.sats_per_plane + slot_index)


def satellite_ids(spec: ShellSpec) -> list[SatelliteId]:
    """All satellite ids of a shell in flat id order."""
    return [SatelliteId.from_flat(spec, flat_id) for flat_id in range(spec.n_satellites)]


class EcefPoint(NamedTuple):
    """Point in the Earth-centered Earth-fixed frame in kilometers."""

    x: float
    y: float
    z: float

    def as_array(self) -> FloatArray:
        """Point as numpy array."""
        return np.array([self.x, self.y, self.z], dtype=float)

    @property
    def norm(self) -> float:
        """Distance to the Earth's center."""
        return math.sqrt(self.x**2 + self.y**2 + self.z**2)


class SiteRole(str, enum.Enum):
    """Role of a ground site in a scenario."""

    CLIENT = "client"
    ORIGIN = "origin"
    SCHEDULER = "scheduler"


@dataclass(frozen=True)
class GroundSite:
    """Ground site.

    Attributes:
        site_id: Unique name
        latitude_deg: Latitude in [-90, 90]
        longitude_deg: Longitude in (-180, 180]
        altitude_km: Altitude above the mean Earth radius
        role: Role of the site
    """

    site_id: str
    latitude_deg: float
    longitude_deg: float
    altitude_km: float = 0.0
    role: SiteRole = SiteRole.CLIENT

    def __post_init__(self) -> None:
        """Check invariants."""
        if not -90.0 <= self.latitude_deg <= 90.0:
            raise DomainError(
                f"Site {self.site_id}: latitude {self.latitude_deg} outside [-90, 90]"
            )
        if not -180.0 < self.longitude_deg <= 180.0:
            raise DomainError(
                f"Site {self.site_id}: longitude {self.longitude_deg} outside (-180, 180]"
            )
        # Roles may come in as plain strings from files
        object.__setattr__(self, "role", SiteRole(self.role))


@dataclass(frozen=True)
class ConstellationState:
    """Satellite positions of a shell at one instant.

    Attributes:
        spec: Shell
        t: Propagation time without the epoch offset
        positions: ECEF positions in kilometers, row i belongs to flat id i
    """

    spec: ShellSpec
    t: float
    positions: FloatArray = field(repr=False)

    def __getitem__(self, sat: SatelliteId | int) -> EcefPoint:
        """Position of a satellite."""
        flat_id = sat.flat_id if isinstance(sat, SatelliteId) else int(sat)
        return EcefPoint(*self.positions[flat_id])

    def __len__(self) -> int:
        """Number of satellites."""
        return len(self.positions)

    def items(self) -> list[tuple[SatelliteId, EcefPoint]]:
        """Association satellite id to position."""
        return [(sat, self[sat]) for sat in satellite_ids(self.spec)]


def _anomalies(spec: ShellSpec, t: float) -> tuple[FloatArray, FloatArray]:
    """RAAN and argument of latitude of every satellite in flat id order."""
    plane_index = np.repeat(np.arange(spec.planes), spec.sats_per_plane)
    slot_index = np.tile(np.arange(spec.sats_per_plane), spec.planes)

    raan = np.deg2rad(plane_index * spec.raan_spread_deg / spec.planes)
    mean_motion = 2.0 * math.pi / spec.period_s
    phasing = 2.0 * math.pi * spec.phase_offset / spec.n_satellites
    argument_of_latitude = (
        2.0 * math.pi * slot_index / spec.sats_per_plane
        + phasing * plane_index
        + mean_motion * (t + spec.epoch_offset_s)
    )
    return raan, argument_of_latitude


def inertial_positions(spec: ShellSpec, t: float) -> FloatArray:
    """Satellite positions in the inertial frame, i.e. before the Earth-rotation step.

    Args:
        spec: Shell
        t: Seconds, the epoch offset is added

    Returns:
        Positions (n_satellites x 3) in kilometers
    """
    raan, u = _anomalies(spec, t)
    inclination = math.radians(spec.inclination_deg)

    cos_raan, sin_raan = np.cos(raan), np.sin(raan)
    cos_u, sin_u = np.cos(u), np.sin(u)
    return spec.radius_km * np.column_stack(
        (
            cos_raan * cos_u - sin_raan * sin_u * math.cos(inclination),
            sin_raan * cos_u + cos_raan * sin_u * math.cos(inclination),
            sin_u * math.sin(inclination),
        )
    )


def propagate(spec: ShellSpec, t: float) -> ConstellationState:
    """Propagate a shell to time t.

    Args:
        spec: Shell
        t: Seconds since the scenario start, t >= 0

    Returns:
        Constellation state in the Earth-fixed frame
    """
    if t < 0:
        raise DomainError(f"Propagation time has to be non-negative, got {t}")

    inertial = inertial_positions(spec, t)

    # Rotate into the Earth-fixed frame
    theta = OMEGA_EARTH_RAD_S * (t + spec.epoch_offset_s)
    cos_theta, sin_theta = math.cos(theta), math.sin(theta)
    positions = np.column_stack(
        (
            cos_theta * inertial[:, 0] + sin_theta * inertial[:, 1],
            -sin_theta * inertial[:, 0] + cos_theta * inertial[:, 1],
            inertial[:, 2],
        )
    )
    return ConstellationState(spec=spec, t=t, positions=positions)


def geodetic_to_ecef(site: GroundSite) -> EcefPoint:
    """Convert a site to ECEF on a spherical Earth.

    Args:
        site: Ground site

    Returns:
        Site position
    """
    radius = R_EARTH_KM + site.altitude_km
    latitude = math.radians(site.latitude_deg)
    longitude = math.radians(site.longitude_deg)
    return EcefPoint(
        radius * math.cos(latitude) * math.cos(longitude),
        radius * math.cos(latitude) * math.sin(longitude),
        radius * math.sin(latitude),
    )


def sites_to_ecef(sites: Sequence[GroundSite]) -> FloatArray:
    """ECEF positions of several sites (n_sites x 3)."""
    return np.array([geodetic_to_ecef(site) for site in sites], dtype=float).reshape(-1, 3)


def load_shell(path: Path) -> ShellSpec:
    """Load a shell file (YAML, JSON or TOML).

    Args:
        path: Shell file

    Returns:
        Shell
    """
    return ShellSpec.from_dict(load_structured_file(path), str(path))


def load_sites(path: Path) -> list[GroundSite]:
    """Load a sites CSV.

    Args:
        path: CSV with header site_id,latitude_deg,longitude_deg,altitude_km,role

    Returns:
        Sites in file order
    """
    table = read_csv_table(path, SITES_COLUMNS)
    sites = [
        GroundSite(
            site_id=row.site_id,
            latitude_deg=float(row.latitude_deg),
            longitude_deg=float(row.longitude_deg),
            altitude_km=float(row.altitude_km),
            role=SiteRole(row.role),
        )
        for row in table.itertuples(index=False)
    ]

    duplicated = table["site_id"][table["site_id"].duplicated()]
    if not duplicated.empty:
        raise ValueError(
            f"Duplicate site ids in {path}: {', '.join(sorted(set(duplicated)))}"
        )

    logger.debug(f"Loaded {len(sites)} sites from {path}")
    return sites


def jitter_sites(
    sites: Sequence[GroundSite], seed: int, max_offset_deg: float = 0.1
) -> list[GroundSite]:
    """Jitter site coordinates deterministically.

    Bundled site lists are approximations; jittering them tests the sensitivity of results to
    the exact client positions.

    Args:
        sites: Sites to jitter
        seed: Random seed
        max_offset_deg: Maximum offset per coordinate

    Returns:
        Jittered sites
    """
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(-max_offset_deg, max_offset_deg, size=(len(sites), 2))

    jittered = []
    for site, (d_lat, d_lon) in zip(sites, offsets):
        latitude = float(np.clip(site.latitude_deg + d_lat, -90.0, 90.0))
        # Wrap into (-180, 180]
        longitude = float(-((-(site.longitude_deg + d_lon) + 180.0) % 360.0 - 180.0))
        jittered.append(replace(site, latitude_deg=latitude, longitude_deg=longitude))
    return jittered
