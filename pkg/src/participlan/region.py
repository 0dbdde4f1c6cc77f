"""Region model: areas, land-use vocabulary, plans, and spatial queries.

A region is a fixed partition of an urban district into polygonal areas.
Areas either carry a fixed use (residential stock or pre-existing green
land) or are vacant and await an assignment from the 8 assignable types.
A plan is a total assignment over the vacant areas. Region and Plan are
immutable; all queries here are pure functions.
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from . import geometry
from .errors import InvariantError, NotPresent, ParseError
from .geometry import Point


class LandUse(str, enum.Enum):
    RESIDENTIAL = "residential"
    GREEN_FIXED = "green_fixed"
    SCHOOL = "school"
    HOSPITAL = "hospital"
    CLINIC = "clinic"
    BUSINESS = "business"
    OFFICE = "office"
    RECREATION = "recreation"
    PARK = "park"
    OPEN_SPACE = "open_space"

    @classmethod
    def parse(cls, text: str) -> "LandUse":
        key = str(text).strip().lower().replace("-", " ").replace("_", " ")
        key = " ".join(key.split())
        try:
            return _USE_LOOKUP[key]
        except KeyError:
            raise ValueError(f"unknown land use {text!r}") from None


_USE_LOOKUP = {u.value.replace("_", " "): u for u in LandUse}
_USE_LOOKUP.update({
    "open": LandUse.OPEN_SPACE,
    "green": LandUse.GREEN_FIXED,
    "green land": LandUse.GREEN_FIXED,
    "business area": LandUse.BUSINESS,
    "office area": LandUse.OFFICE,
    "recreation area": LandUse.RECREATION,
})

#: The 8 types a planner may assign to a vacant area, in canonical order.
ASSIGNABLE_USES = (
    LandUse.SCHOOL,
    LandUse.HOSPITAL,
    LandUse.CLINIC,
    LandUse.BUSINESS,
    LandUse.OFFICE,
    LandUse.RECREATION,
    LandUse.PARK,
    LandUse.OPEN_SPACE,
)

FIXED_USES = (LandUse.RESIDENTIAL, LandUse.GREEN_FIXED)

#: Green uses whose surroundings count toward the ecology service range.
GREEN_USES = (LandUse.PARK, LandUse.OPEN_SPACE, LandUse.GREEN_FIXED)

DistanceMode = str  # "boundary" | "centroid"


@dataclass(frozen=True)
class Area:
    id: int
    boundary: tuple[Point, ...]
    community_id: int
    fixed_use: Optional[LandUse] = None

    @cached_property
    def centroid(self) -> Point:
        return geometry.polygon_centroid(self.boundary)

    @cached_property
    def area_m2(self) -> float:
        return geometry.polygon_area(self.boundary)

    @property
    def is_vacant(self) -> bool:
        return self.fixed_use is None


@dataclass(frozen=True)
class Region:
    name: str
    areas: tuple[Area, ...]
    requirements: Mapping[LandUse, int]
    communities: tuple[tuple[int, str], ...]
    crs_note: str = "local planar meters"

    @cached_property
    def areas_by_id(self) -> dict[int, Area]:
        return {a.id: a for a in self.areas}

    @cached_property
    def vacant_ids(self) -> tuple[int, ...]:
        return tuple(a.id for a in self.areas if a.is_vacant)

    @cached_property
    def residential_areas(self) -> tuple[Area, ...]:
        return tuple(a for a in self.areas if a.fixed_use is LandUse.RESIDENTIAL)

    @cached_property
    def community_ids(self) -> tuple[int, ...]:
        return tuple(cid for cid, _ in self.communities)

    def community_areas(self, community_id: int) -> tuple[Area, ...]:
        return tuple(a for a in self.areas if a.community_id == community_id)

    def validate(self) -> None:
        ids = [a.id for a in self.areas]
        if sorted(ids) != list(range(1, len(ids) + 1)):
            raise InvariantError(
                f"area ids must be dense 1..{len(ids)}, got {sorted(ids)[:8]}...")
        for a in self.areas:
            if len(a.boundary) < 3:
                raise InvariantError(f"area {a.id}: polygon needs >=3 vertices")
            if a.area_m2 <= 0.0:
                raise InvariantError(f"area {a.id}: degenerate polygon (zero area)")
            if not geometry.is_simple_polygon(a.boundary):
                raise InvariantError(f"area {a.id}: polygon is self-intersecting")
            if a.fixed_use is not None and a.fixed_use not in FIXED_USES:
                raise InvariantError(
                    f"area {a.id}: fixed_use {a.fixed_use.value} is not residential/green_fixed")
            if a.community_id not in self.community_ids:
                raise InvariantError(
                    f"area {a.id}: unknown community {a.community_id}")
        missing = [u.value for u in ASSIGNABLE_USES if u not in self.requirements]
        if missing:
            raise InvariantError(f"requirements missing entries for: {missing}")
        for use, count in self.requirements.items():
            if use not in ASSIGNABLE_USES:
                raise InvariantError(f"requirements entry for non-assignable use {use.value}")
            if count < 0:
                raise InvariantError(f"negative requirement for {use.value}")
        total = sum(self.requirements.values())
        if total > len(self.vacant_ids):
            raise InvariantError(
                f"requirements sum {total} exceeds {len(self.vacant_ids)} vacant areas")
        if not self.residential_areas:
            raise InvariantError("region has no residential area")


@dataclass(frozen=True)
class Plan:
    assignment: Mapping[int, LandUse]

    def get(self, area_id: int) -> Optional[LandUse]:
        return self.assignment.get(area_id)

    def use_of(self, area: Area) -> Optional[LandUse]:
        """Effective use of an area under this plan (fixed use wins)."""
        if area.fixed_use is not None:
            return area.fixed_use
        return self.assignment.get(area.id)


def plan_to_json_dict(plan: Plan, provenance: Optional[dict] = None) -> dict:
    doc = {"assignments": {str(k): plan.assignment[k].value
                           for k in sorted(plan.assignment)}}
    if provenance is not None:
        doc["provenance"] = provenance
    return doc


def plan_digest(plan: Plan) -> str:
    blob = json.dumps(plan_to_json_dict(plan), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def save_plan(plan: Plan, path: Union[str, Path], provenance: Optional[dict] = None) -> None:
    Path(path).write_text(
        json.dumps(plan_to_json_dict(plan, provenance), indent=2, sort_keys=True) + "\n")


def load_plan(path: Union[str, Path]) -> Plan:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "assignments" not in doc:
        raise ParseError(f"{path}: missing 'assignments' object")
    assignment = {}
    for key, value in doc["assignments"].items():
        try:
            area_id = int(key)
        except ValueError:
            raise ParseError(f"{path}: non-integer area id {key!r}") from None
        try:
            assignment[area_id] = LandUse.parse(value)
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}") from None
    return Plan(assignment)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    counts: dict[LandUse, int]
    required: dict[LandUse, int]
    deficits: dict[LandUse, int]
    missing_areas: tuple[int, ...]
    unexpected_areas: tuple[int, ...]
    bad_assignments: tuple[int, ...]

    def summary(self) -> str:
        if self.ok:
            return "plan valid: all quotas met and every vacant area assigned"
        parts = []
        if self.deficits:
            parts.append("deficits " + ", ".join(
                f"{u.value}:{d}" for u, d in sorted(self.deficits.items(), key=lambda kv: kv[0].value)))
        if self.missing_areas:
            parts.append(f"unassigned vacant areas {list(self.missing_areas)}")
        if self.unexpected_areas:
            parts.append(f"assignments to non-vacant/unknown areas {list(self.unexpected_areas)}")
        if self.bad_assignments:
            parts.append(f"non-assignable uses on areas {list(self.bad_assignments)}")
        return "plan invalid: " + "; ".join(parts)


def validate_plan(region: Region, plan: Plan) -> ValidationReport:
    """Check quota satisfaction and exact coverage of the vacant areas."""
    vacant = set(region.vacant_ids)
    assigned = set(plan.assignment)
    missing = tuple(sorted(vacant - assigned))
    unexpected = tuple(sorted(assigned - vacant))
    bad = tuple(sorted(a for a, u in plan.assignment.items() if u not in ASSIGNABLE_USES))

    counts = {u: 0 for u in ASSIGNABLE_USES}
    for area_id, use in plan.assignment.items():
        if area_id in vacant and use in counts:
            counts[use] += 1
    required = dict(region.requirements)
    deficits = {u: required[u] - counts[u]
                for u in ASSIGNABLE_USES if counts[u] < required[u]}
    ok = not (missing or unexpected or bad or deficits)
    return ValidationReport(ok, counts, required, deficits, missing, unexpected, bad)


# ---------------------------------------------------------------------------
# Geo-data ingestion


def _ring_from_coordinates(coords, feature_label: str) -> tuple[Point, ...]:
    if not isinstance(coords, list) or not coords:
        raise ParseError(f"{feature_label}: polygon has no coordinate ring")
    ring = coords[0]
    pts = []
    for pair in ring:
        if not isinstance(pair, (list, tuple)) or len(pair) < 2:
            raise ParseError(f"{feature_label}: malformed coordinate {pair!r}")
        pts.append(Point(float(pair[0]), float(pair[1])))
    if len(pts) >= 2 and pts[0] == pts[-1]:
        pts = pts[:-1]
    return tuple(pts)


def _looks_like_degrees(areas: Sequence[Area]) -> bool:
    for a in areas:
        for x, y in a.boundary:
            if abs(x) > 180.0 or abs(y) > 90.0:
                return False
    return True


def load_region(path: Union[str, Path]) -> Region:
    """Load a region from a GeoJSON-style feature collection.

    Each feature carries properties id, community_id, and optional
    fixed_use; top-level members requirements, name, crs_note, and
    communities travel alongside the features.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ParseError(f"{path}: expected a FeatureCollection document")
    features = doc.get("features")
    if not isinstance(features, list) or not features:
        raise ParseError(f"{path}: no features")

    areas = []
    for i, feat in enumerate(features):
        label = f"feature {i}"
        props = feat.get("properties") or {}
        if "id" not in props:
            raise ParseError(f"{label}: missing id")
        area_id = int(props["id"])
        label = f"feature id={area_id}"
        geom = feat.get("geometry") or {}
        if geom.get("type") != "Polygon":
            raise ParseError(f"{label}: geometry must be a Polygon")
        ring = _ring_from_coordinates(geom.get("coordinates"), label)
        fixed_use = None
        if props.get("fixed_use") is not None:
            try:
                fixed_use = LandUse.parse(props["fixed_use"])
            except ValueError as exc:
                raise ParseError(f"{label}: {exc}") from None
        if "community_id" not in props:
            raise ParseError(f"{label}: missing community_id")
        areas.append(Area(id=area_id, boundary=ring,
                          community_id=int(props["community_id"]),
                          fixed_use=fixed_use))

    ids = [a.id for a in areas]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise InvariantError(f"duplicate area ids {dupes}")
    if _looks_like_degrees(areas):
        raise InvariantError(
            "all coordinates fit inside the lon/lat degree box; this loader "
            "requires a local projected coordinate system in meters")

    req_doc = doc.get("requirements")
    if not isinstance(req_doc, dict):
        raise ParseError(f"{path}: missing top-level requirements map")
    requirements = {}
    for key, value in req_doc.items():
        try:
            requirements[LandUse.parse(key)] = int(value)
        except ValueError as exc:
            raise ParseError(f"requirements: {exc}") from None

    comm_doc = doc.get("communities")
    if comm_doc:
        communities = tuple((int(c["id"]), str(c.get("name", f"Community {c['id']}")))
                            for c in comm_doc)
    else:
        communities = tuple((cid, f"Community {cid}")
                            for cid in sorted({a.community_id for a in areas}))

    region = Region(
        name=str(doc.get("name", path.stem)),
        areas=tuple(sorted(areas, key=lambda a: a.id)),
        requirements=requirements,
        communities=communities,
        crs_note=str(doc.get("crs_note", "local planar meters")),
    )
    region.validate()
    return region


def region_to_json_dict(region: Region) -> dict:
    features = []
    for a in region.areas:
        ring = [[x, y] for x, y in a.boundary]
        ring.append(ring[0])
        props = {"id": a.id, "community_id": a.community_id}
        if a.fixed_use is not None:
            props["fixed_use"] = a.fixed_use.value
        features.append({
            "type": "Feature",
            "properties": props,
            "geometry": {"type": "Polygon", "coordinates": [ring]},
        })
    return {
        "type": "FeatureCollection",
        "name": region.name,
        "crs_note": region.crs_note,
        "requirements": {u.value: n for u, n in sorted(
            region.requirements.items(), key=lambda kv: kv[0].value)},
        "communities": [{"id": cid, "name": name} for cid, name in region.communities],
        "features": features,
    }


def save_region(region: Region, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(region_to_json_dict(region), indent=2) + "\n")


# ---------------------------------------------------------------------------
# Spatial queries


def min_distance(point: Point, area: Area, mode: DistanceMode = "boundary") -> float:
    """Distance from a point to an area: 0 inside, else to the nearest edge.

    mode="centroid" measures to the area centroid instead; used for
    sensitivity checks and for cheap planner-side weights.
    """
    if mode == "centroid":
        cx, cy = area.centroid
        return math.hypot(point[0] - cx, point[1] - cy)
    return geometry.distance_to_polygon(point, area.boundary)


def min_distance_many(points: np.ndarray, area: Area,
                      mode: DistanceMode = "boundary") -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if mode == "centroid":
        cx, cy = area.centroid
        return np.hypot(pts[:, 0] - cx, pts[:, 1] - cy)
    return geometry.distance_to_polygon_many(pts, area.boundary)


def nearest_of_types(home: Point, region: Region, plan: Plan,
                     types: Iterable[LandUse],
                     mode: DistanceMode = "boundary") -> tuple[int, float]:
    """Closest area whose effective use is in `types`; ties go to lower id."""
    wanted = set(types)
    if not wanted:
        raise ValueError("types must be non-empty")
    best_id = None
    best_d = math.inf
    for area in region.areas:
        if plan.use_of(area) not in wanted:
            continue
        d = min_distance(home, area, mode)
        if d < best_d:
            best_id, best_d = area.id, d
    if best_id is None:
        raise NotPresent(
            "no area of type(s) " + ", ".join(sorted(u.value for u in wanted)))
    return best_id, best_d


@dataclass(frozen=True)
class NeighborhoodEntry:
    area_id: int
    land_use: Optional[LandUse]
    distance_m: float
    direction: str


@dataclass(frozen=True)
class NeighborhoodView:
    entries: tuple[NeighborhoodEntry, ...] = field(default_factory=tuple)

    def area_ids(self) -> tuple[int, ...]:
        return tuple(e.area_id for e in self.entries)


def neighborhood(home: Point, region: Region, plan: Plan, radius: float,
                 mode: DistanceMode = "boundary") -> NeighborhoodView:
    """All areas within `radius` of home, labeled with use, distance, bearing."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    entries = []
    for area in region.areas:
        d = min_distance(home, area, mode)
        if d <= radius:
            cx, cy = area.centroid
            entries.append(NeighborhoodEntry(
                area_id=area.id,
                land_use=plan.use_of(area),
                distance_m=d,
                direction=geometry.compass_label(cx - home[0], cy - home[1]),
            ))
    entries.sort(key=lambda e: (e.distance_m, e.area_id))
    return NeighborhoodView(entries=tuple(entries))
