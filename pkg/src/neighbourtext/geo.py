"""Spatial grounding: gazetteer units, attribute zones and great-circle joins."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .errors import InputError

EARTH_RADIUS_KM = 6371.0
# distances closer than this to the minimum are treated as ties
TIE_KM = 1e-12


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        lat, lon = float(self.lat), float(self.lon)
        if not (math.isfinite(lat) and -90.0 <= lat <= 90.0):
            raise InputError(f"latitude out of range: {self.lat!r}")
        if not (math.isfinite(lon) and -180.0 <= lon <= 180.0):
            raise InputError(f"longitude out of range: {self.lon!r}")
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", lon)


@dataclass(frozen=True)
class SpatialUnit:
    unit_id: str
    name: str
    centre: GeoPoint

    def __post_init__(self):
        if not self.name or not self.name.strip():
            raise InputError(f"unit {self.unit_id!r} has an empty name")


class Gazetteer:
    """Named spatial units, iterated in ``unit_id`` order."""

    def __init__(self, units: Iterable[SpatialUnit]):
        units = list(units)
        seen = set()
        for u in units:
            if u.unit_id in seen:
                raise InputError(f"duplicate unit_id {u.unit_id!r}")
            seen.add(u.unit_id)
        self.units: tuple[SpatialUnit, ...] = tuple(sorted(units, key=lambda u: u.unit_id))
        self._by_id = {u.unit_id: u for u in self.units}
        self._lat = np.array([u.centre.lat for u in self.units], dtype=np.float64)
        self._lon = np.array([u.centre.lon for u in self.units], dtype=np.float64)

    def __len__(self):
        return len(self.units)

    def __iter__(self):
        return iter(self.units)

    def __getitem__(self, unit_id: str) -> SpatialUnit:
        return self._by_id[unit_id]

    def __contains__(self, unit_id) -> bool:
        return unit_id in self._by_id

    @property
    def unit_ids(self) -> list[str]:
        return [u.unit_id for u in self.units]

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        return self._lat, self._lon

    def units_by_name(self) -> dict[str, list[str]]:
        """Case-folded unit name -> unit ids carrying that name."""
        out: dict[str, list[str]] = {}
        for u in self.units:
            out.setdefault(u.name.strip().casefold(), []).append(u.unit_id)
        return out


@dataclass(frozen=True)
class AttributeSource:
    zone_id: str
    centroid: GeoPoint
    values: Mapping[str, float]

    def __post_init__(self):
        for name, v in self.values.items():
            if not math.isfinite(v):
                raise InputError(f"zone {self.zone_id!r}: non-finite value for {name!r}")


@dataclass
class UnitAttributeTable:
    """Attribute values aggregated onto units.

    Units with no contributing zone are absent rather than zero-filled.
    """

    entries: dict[tuple[str, str], float] = field(default_factory=dict)
    support: dict[str, int] = field(default_factory=dict)

    def units(self) -> list[str]:
        return sorted(self.support)

    def attributes(self) -> list[str]:
        return sorted({a for _, a in self.entries})

    def get(self, unit_id: str, attribute: str) -> float | None:
        return self.entries.get((unit_id, attribute))

    def column(self, attribute: str) -> dict[str, float]:
        return {u: v for (u, a), v in self.entries.items() if a == attribute}


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in kilometres on a sphere of radius 6371 km."""
    la1, la2 = math.radians(a.lat), math.radians(b.lat)
    s_lat = math.sin((la2 - la1) * 0.5)
    s_lon = math.sin((math.radians(b.lon) - math.radians(a.lon)) * 0.5)
    h = s_lat * s_lat + math.cos(la1) * math.cos(la2) * (s_lon * s_lon)
    return 2.0 * EARTH_RADIUS_KM * math.asin(math.sqrt(min(1.0, h)))


def assign_points(points: Sequence[GeoPoint], g: Gazetteer, max_km: float) -> list[str | None]:
    """Vectorised :func:`assign_point` over many points."""
    if max_km <= 0:
        raise InputError("max_km must be positive")
    if not points or len(g) == 0:
        return [None] * len(points)
    lat = np.array([p.lat for p in points], dtype=np.float64)
    lon = np.array([p.lon for p in points], dtype=np.float64)
    c_lat, c_lon = g.coordinates()
    idx = kernels.nearest_within(lat, lon, c_lat, c_lon, float(max_km), TIE_KM)
    ids = g.unit_ids
    return [ids[i] if i >= 0 else None for i in idx.tolist()]


def assign_point(p: GeoPoint, g: Gazetteer, max_km: float = 1.0) -> str | None:
    """Closest unit to ``p`` if it lies within ``max_km``; ties go to the smallest id."""
    return assign_points([p], g, max_km)[0]


def aggregate_attributes(
    g: Gazetteer,
    sources: Sequence[AttributeSource],
    k_max: int = 10,
    max_km: float = 1.0,
) -> UnitAttributeTable:
    """Average zone attributes onto units.

    For each unit the ``k_max`` closest zones whose centroid lies within
    ``max_km`` of the unit centre are selected (distance ties by zone id).
    Each attribute is the mean over the selected zones that carry a value
    for it.
    """
    if k_max < 1:
        raise InputError("k_max must be >= 1")
    if max_km <= 0:
        raise InputError("max_km must be positive")
    table = UnitAttributeTable()
    if not sources or len(g) == 0:
        return table
    zones = sorted(sources, key=lambda s: s.zone_id)
    if len({z.zone_id for z in zones}) != len(zones):
        raise InputError("duplicate zone_id in attribute sources")
    z_lat = np.array([z.centroid.lat for z in zones], dtype=np.float64)
    z_lon = np.array([z.centroid.lon for z in zones], dtype=np.float64)
    c_lat, c_lon = g.coordinates()
    dist = kernels.haversine_matrix(c_lat, c_lon, z_lat, z_lon)
    for u, row in zip(g.units, dist):
        near = np.flatnonzero(row <= max_km)
        if near.size == 0:
            continue
        # zones are sorted by id, so a stable sort on distance breaks ties by id
        order = near[np.argsort(row[near], kind="stable")][:k_max]
        chosen = [zones[i] for i in order]
        table.support[u.unit_id] = len(chosen)
        names = sorted({a for z in chosen for a in z.values})
        for a in names:
            vals = [z.values[a] for z in chosen if a in z.values]
            table.entries[(u.unit_id, a)] = math.fsum(vals) / len(vals)
    return table


def load_gazetteer(path) -> Gazetteer:
    """Read a ``unit_id,name,lat,lon`` CSV file."""
    path = Path(path)
    units = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"unit_id", "name", "lat", "lon"} - set(reader.fieldnames or ())
        if missing:
            raise InputError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                centre = GeoPoint(float(row["lat"]), float(row["lon"]))
                units.append(SpatialUnit(row["unit_id"].strip(), row["name"].strip(), centre))
            except (TypeError, ValueError) as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
    return Gazetteer(units)


def load_attribute_sources(path) -> list[AttributeSource]:
    """Read a ``zone_id,lat,lon,<attr>...`` CSV file; empty cells are missing values."""
    path = Path(path)
    out = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if fields[:3] != ["zone_id", "lat", "lon"]:
            raise InputError(f"{path}: header must start with zone_id,lat,lon")
        attrs = fields[3:]
        for lineno, row in enumerate(reader, start=2):
            try:
                centroid = GeoPoint(float(row["lat"]), float(row["lon"]))
                values = {}
                for a in attrs:
                    cell = (row.get(a) or "").strip()
                    if cell:
                        values[a] = float(cell)
                out.append(AttributeSource(row["zone_id"].strip(), centroid, values))
            except (TypeError, ValueError) as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_gazetteer(g: Gazetteer, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit_id", "name", "lat", "lon"])
        for u in g:
            w.writerow([u.unit_id, u.name, repr(u.centre.lat), repr(u.centre.lon)])


def write_attribute_sources(sources: Sequence[AttributeSource], attributes: Sequence[str], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["zone_id", "lat", "lon", *attributes])
        for z in sources:
            cells = [repr(z.values[a]) if a in z.values else "" for a in attributes]
            w.writerow([z.zone_id, repr(z.centroid.lat), repr(z.centroid.lon), *cells])


def write_unit_attributes(table: UnitAttributeTable, path) -> None:
    """Persist an aggregated table as ``unit_id,support,<attr>...`` CSV."""
    attrs = table.attributes()
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit_id", "support", *attrs])
        for u in table.units():
            cells = []
            for a in attrs:
                v = table.get(u, a)
                cells.append("" if v is None else repr(v))
            w.writerow([u, table.support[u], *cells])


def read_unit_attributes(path) -> UnitAttributeTable:
    table = UnitAttributeTable()
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        attrs = (reader.fieldnames or [])[2:]
        for row in reader:
            u = row["unit_id"]
            table.support[u] = int(row["support"])
            for a in attrs:
                if row[a]:
                    table.entries[(u, a)] = float(row[a])
    return table
