"""Exact 2D primitives: oriented boxes, polygons with holes, polylines.

All inputs are plain float coordinates in meters. Functions are pure and
thread-safe. Boundary conventions are deliberate and load-bearing:

* a point on a polygon edge counts as *inside* the containing region,
* touching oriented boxes count as *overlapping*.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


def _as_points(arr) -> np.ndarray:
    pts = np.asarray(arr, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError("expected an (N, 2) array of points")
    return pts


def polygon_signed_area(ring) -> float:
    """Shoelace area; positive for counter-clockwise vertex order."""
    pts = _as_points(ring)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True, eq=False)
class OrientedBox:
    """Rectangle with an arbitrary heading, given by center and half extents."""

    center: np.ndarray
    heading: float
    half_extent: tuple  # (half_length, half_width)

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        hl, hw = self.half_extent
        if not (hl > 0 and hw > 0):
            raise ValidationError("half extents must be positive", field="half_extent")

    def axes(self):
        """Unit long axis and left normal."""
        c, s = np.cos(self.heading), np.sin(self.heading)
        return np.array([c, s]), np.array([-s, c])

    def corners(self) -> np.ndarray:
        """4 corners in CCW order: front-left, rear-left, rear-right, front-right."""
        u, v = self.axes()
        hl, hw = self.half_extent
        return np.array(
            [
                self.center + hl * u + hw * v,
                self.center - hl * u + hw * v,
                self.center - hl * u - hw * v,
                self.center + hl * u - hw * v,
            ]
        )

    def contains_points(self, points) -> np.ndarray:
        """Boundary-inclusive membership test for an (N, 2) array."""
        pts = _as_points(points)
        u, v = self.axes()
        rel = pts - self.center
        hl, hw = self.half_extent
        return (np.abs(rel @ u) <= hl) & (np.abs(rel @ v) <= hw)


def boxes_overlap(a: OrientedBox, b: OrientedBox) -> bool:
    """Separating-axis test on the 4 box axes; touching counts as overlap."""
    ua, va = a.axes()
    ub, vb = b.axes()
    hla, hwa = a.half_extent
    hlb, hwb = b.half_extent
    delta = b.center - a.center
    for axis in (ua, va, ub, vb):
        dist = abs(float(delta @ axis))
        ra = hla * abs(float(ua @ axis)) + hwa * abs(float(va @ axis))
        rb = hlb * abs(float(ub @ axis)) + hwb * abs(float(vb @ axis))
        if dist > ra + rb:
            return False
    return True


class Polygon:
    """Simple polygon given as an (N, 2) vertex ring, N >= 3, not closed."""

    __slots__ = ("vertices",)

    def __init__(self, vertices):
        pts = _as_points(vertices)
        if pts.shape[0] < 3:
            raise ValidationError("polygon needs at least 3 vertices")
        if abs(polygon_signed_area(pts)) == 0.0:
            raise ValidationError("polygon vertices are collinear")
        pts = pts.copy()
        pts.flags.writeable = False
        self.vertices = pts

    def __eq__(self, other):
        if not isinstance(other, Polygon):
            return NotImplemented
        return np.array_equal(self.vertices, other.vertices)

    def __hash__(self):
        return hash(self.vertices.tobytes())

    def signed_area(self) -> float:
        return polygon_signed_area(self.vertices)

    def _edges(self):
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    def on_boundary(self, points) -> np.ndarray:
        """True where a point lies exactly on an edge (no epsilon)."""
        pts = _as_points(points)
        a, b = self._edges()
        out = np.zeros(len(pts), dtype=bool)
        for (ax, ay), (bx, by) in zip(a, b):
            cross = (bx - ax) * (pts[:, 1] - ay) - (by - ay) * (pts[:, 0] - ax)
            in_bbox = (
                (pts[:, 0] >= min(ax, bx))
                & (pts[:, 0] <= max(ax, bx))
                & (pts[:, 1] >= min(ay, by))
                & (pts[:, 1] <= max(ay, by))
            )
            out |= (cross == 0.0) & in_bbox
        return out

    def crossing_inside(self, points) -> np.ndarray:
        """Even-odd ray parity; half-open edge rule keeps vertex hits consistent."""
        pts = _as_points(points)
        px, py = pts[:, 0], pts[:, 1]
        inside = np.zeros(len(pts), dtype=bool)
        a, b = self._edges()
        for (ax, ay), (bx, by) in zip(a, b):
            straddles = (ay > py) != (by > py)
            if not straddles.any():
                continue
            x_int = ax + (py - ay) * (bx - ax) / (by - ay)
            inside ^= straddles & (px < x_int)
        return inside

    def contains(self, points) -> np.ndarray:
        """Boundary-inclusive containment."""
        return self.crossing_inside(points) | self.on_boundary(points)

    def distance_and_closest(self, points):
        """Min distance from each point to the polygon edges, plus foot points."""
        pts = _as_points(points)
        a, b = self._edges()
        best_d2 = np.full(len(pts), np.inf)
        best_p = np.zeros_like(pts)
        for i in range(len(a)):
            seg = b[i] - a[i]
            seg_len2 = float(seg @ seg)
            t = np.clip(((pts - a[i]) @ seg) / seg_len2, 0.0, 1.0)
            foot = a[i] + t[:, None] * seg
            d2 = np.sum((pts - foot) ** 2, axis=1)
            better = d2 < best_d2
            best_d2[better] = d2[better]
            best_p[better] = foot[better]
        return np.sqrt(best_d2), best_p


@dataclass(frozen=True)
class PolygonSet:
    """Region = union of outer rings minus union of hole rings.

    Outers must wind counter-clockwise, holes clockwise (checked by signed
    area). A point on any ring boundary counts as inside the region.
    """

    outers: tuple
    holes: tuple = ()

    def __post_init__(self):
        outers = tuple(p if isinstance(p, Polygon) else Polygon(p) for p in self.outers)
        holes = tuple(p if isinstance(p, Polygon) else Polygon(p) for p in self.holes)
        if not outers:
            raise ValidationError("need at least one outer polygon", field="outers")
        for p in outers:
            if p.signed_area() <= 0:
                raise ValidationError("outer ring must be counter-clockwise", field="outers")
        for p in holes:
            if p.signed_area() >= 0:
                raise ValidationError("hole ring must be clockwise", field="holes")
        object.__setattr__(self, "outers", outers)
        object.__setattr__(self, "holes", holes)

    def rings(self):
        return self.outers + self.holes

    def contains_points(self, points) -> np.ndarray:
        """Vectorized membership; boundary points count as inside."""
        pts = _as_points(points)
        in_outer = np.zeros(len(pts), dtype=bool)
        for p in self.outers:
            in_outer |= p.contains(pts)
        strictly_in_hole = np.zeros(len(pts), dtype=bool)
        for h in self.holes:
            strictly_in_hole |= h.crossing_inside(pts) & ~h.on_boundary(pts)
        return in_outer & ~strictly_in_hole

    def distance_and_closest(self, points):
        """Unsigned distance to the nearest ring edge, plus the foot point."""
        pts = _as_points(points)
        best_d = np.full(len(pts), np.inf)
        best_p = np.zeros_like(pts)
        for ring in self.rings():
            d, foot = ring.distance_and_closest(pts)
            better = d < best_d
            best_d[better] = d[better]
            best_p[better] = foot[better]
        return best_d, best_p


def point_in_polygon_set(p, m: PolygonSet) -> bool:
    """True iff p is inside some outer ring and strictly inside no hole."""
    return bool(m.contains_points(np.asarray(p, dtype=np.float64)[None, :])[0])


def signed_distance_to_drivable(p, m: PolygonSet) -> float:
    """Distance to the region boundary: positive outside, negative inside."""
    d, _ = m.distance_and_closest(np.asarray(p, dtype=np.float64)[None, :])
    sign = 1.0 if not point_in_polygon_set(p, m) else -1.0
    return sign * float(d[0])


def signed_distances(points, m: PolygonSet):
    """Batch signed distance with outward unit directions.

    Returns ``(sd, outward)`` where ``outward[i]`` is the unit gradient of the
    distance field at strictly-outside points and zero elsewhere (inside and
    exactly on the boundary).
    """
    pts = _as_points(points)
    d, foot = m.distance_and_closest(pts)
    inside = m.contains_points(pts)
    sd = np.where(inside, -d, d)
    outward = np.zeros_like(pts)
    outside = ~inside & (d > 0.0)
    if outside.any():
        outward[outside] = (pts[outside] - foot[outside]) / d[outside, None]
    return sd, outward


@dataclass(frozen=True, eq=False)
class Polyline:
    """Ordered point chain with cached cumulative arclength."""

    points: np.ndarray
    arclength: np.ndarray = field(init=False)

    def __eq__(self, other):
        if not isinstance(other, Polyline):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())

    def __post_init__(self):
        pts = _as_points(self.points).copy()
        if pts.shape[0] < 2:
            raise ValidationError("polyline needs at least 2 points", field="points")
        seg_len = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(seg_len == 0.0):
            raise ValidationError("consecutive polyline points must differ", field="points")
        pts.flags.writeable = False
        cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        cum.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "arclength", cum)

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    def point_at(self, s: float) -> np.ndarray:
        """Point at arclength s, clamped to the line's extent."""
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.arclength, s, side="right") - 1)
        i = min(i, len(self.points) - 2)
        seg = self.points[i + 1] - self.points[i]
        seg_len = self.arclength[i + 1] - self.arclength[i]
        return self.points[i] + (s - self.arclength[i]) / seg_len * seg

    def tangent_heading_at(self, s: float) -> float:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.arclength, s, side="right") - 1)
        i = min(i, len(self.points) - 2)
        seg = self.points[i + 1] - self.points[i]
        return float(np.arctan2(seg[1], seg[0]))


def project_to_polyline(p, line: Polyline):
    """Project a point onto the polyline.

    Returns ``(s, lateral_offset, tangent_heading)`` of the closest foot
    point; the offset magnitude is the distance to that foot, signed
    positive to the left of the tangent. Ties in distance resolve to the
    smaller arclength.
    """
    p = np.asarray(p, dtype=np.float64)
    a = line.points[:-1]
    b = line.points[1:]
    seg = b - a
    seg_len2 = np.sum(seg * seg, axis=1)
    t = np.clip(np.sum((p - a) * seg, axis=1) / seg_len2, 0.0, 1.0)
    foot = a + t[:, None] * seg
    d2 = np.sum((p - foot) ** 2, axis=1)
    # argmin returns the first minimum; arclength grows with segment index,
    # so this realizes the smaller-s tie rule.
    i = int(np.argmin(d2))
    seg_len = np.sqrt(seg_len2[i])
    s = float(line.arclength[i] + t[i] * seg_len)
    u = seg[i] / seg_len
    rel = p - foot[i]
    # Signed by side of the tangent, magnitude equal to the distance to the
    # foot point (relevant when the foot clamps to a segment endpoint).
    cross = u[0] * rel[1] - u[1] * rel[0]
    dist = float(np.sqrt(d2[i]))
    offset = dist if cross > 0.0 else (-dist if cross < 0.0 else 0.0)
    heading = float(np.arctan2(seg[i, 1], seg[i, 0]))
    return s, offset, heading
