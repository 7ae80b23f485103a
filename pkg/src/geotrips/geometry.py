"""Spherical distance and planar polygon-containment primitives.

Distances use a spherical earth of radius 6,371,000 m.  Containment is
computed in planar lat/lon (equirectangular) space, which is accurate
enough at county scale and keeps the ray-casting test exact and cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidGeometryError

EARTH_RADIUS_M = 6_371_000.0

# A point within this many degrees of a ring edge counts as inside.
EDGE_TOLERANCE_DEG = 1e-12


@dataclass(frozen=True, slots=True)
class GeoPoint:
    lat: float
    lon: float


@dataclass(frozen=True)
class PolygonRing:
    """Implicitly closed ring: the first vertex is not repeated at the end."""

    vertices: tuple[GeoPoint, ...]

    def __post_init__(self):
        verts = tuple(self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 3:
            raise InvalidGeometryError(f"ring needs >= 3 vertices, got {len(verts)}")
        for a, b in zip(verts, verts[1:] + verts[:1]):
            if a.lat == b.lat and a.lon == b.lon:
                raise InvalidGeometryError("ring has two identical consecutive vertices")


@dataclass(frozen=True)
class ZonePolygon:
    outer: PolygonRing
    holes: tuple[PolygonRing, ...] = ()


@dataclass(frozen=True, slots=True)
class BoundingBox:
    min_lat: float
    max_lat: float
    min_lon: float
    max_lon: float

    def contains(self, p: GeoPoint) -> bool:
        return (
            self.min_lat <= p.lat <= self.max_lat
            and self.min_lon <= p.lon <= self.max_lon
        )


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters between two lat/lon pairs in degrees."""
    rlat1 = math.radians(lat1)
    rlat2 = math.radians(lat2)
    dlat = rlat2 - rlat1
    dlon = math.radians(lon2 - lon1)
    s = (
        math.sin(dlat / 2.0) ** 2
        + math.cos(rlat1) * math.cos(rlat2) * math.sin(dlon / 2.0) ** 2
    )
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(s)))


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    return haversine_m(a.lat, a.lon, b.lat, b.lon)


def bbox(poly: ZonePolygon) -> BoundingBox:
    """Tight axis-aligned bounds of the outer ring."""
    lats = [v.lat for v in poly.outer.vertices]
    lons = [v.lon for v in poly.outer.vertices]
    return BoundingBox(min(lats), max(lats), min(lons), max(lons))


def _on_ring_edge(lat: float, lon: float, ring: PolygonRing) -> bool:
    tol2 = EDGE_TOLERANCE_DEG * EDGE_TOLERANCE_DEG
    verts = ring.vertices
    n = len(verts)
    for i in range(n):
        a = verts[i]
        b = verts[(i + 1) % n]
        dy = b.lat - a.lat
        dx = b.lon - a.lon
        seg2 = dx * dx + dy * dy
        if seg2 == 0.0:
            t = 0.0
        else:
            t = ((lat - a.lat) * dy + (lon - a.lon) * dx) / seg2
            t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
        py = a.lat + t * dy
        px = a.lon + t * dx
        d2 = (lat - py) * (lat - py) + (lon - px) * (lon - px)
        if d2 <= tol2:
            return True
    return False


def _ring_crossings(lat: float, lon: float, ring: PolygonRing) -> int:
    """Number of ring edges crossed by the eastward ray from (lat, lon)."""
    verts = ring.vertices
    n = len(verts)
    crossings = 0
    for i in range(n):
        a = verts[i]
        b = verts[(i + 1) % n]
        if (a.lat > lat) != (b.lat > lat):
            lon_at = a.lon + (lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat)
            if lon < lon_at:
                crossings += 1
    return crossings


def point_in_polygon(p: GeoPoint, poly: ZonePolygon) -> bool:
    """Even-odd containment test with a deterministic on-edge tie-break.

    A point within EDGE_TOLERANCE_DEG of any edge (outer or hole boundary)
    is inside; a point strictly interior to a hole is outside.
    """
    rings = (poly.outer,) + poly.holes
    for ring in rings:
        if _on_ring_edge(p.lat, p.lon, ring):
            return True
    crossings = 0
    for ring in rings:
        crossings += _ring_crossings(p.lat, p.lon, ring)
    return crossings % 2 == 1
