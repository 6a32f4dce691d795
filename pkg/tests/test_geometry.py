"""Geometry tests, backed by independent raster/clipping/sampling oracles."""

import math

import numpy as np
import pytest

from drivesafer.errors import ValidationError
from drivesafer.geometry import (
    OrientedBox,
    Polygon,
    PolygonSet,
    Polyline,
    boxes_overlap,
    point_in_polygon_set,
    project_to_polyline,
    signed_distance_to_drivable,
    signed_distances,
)

# ---------------------------------------------------------------------------
# oracles


def clip_polygon(subject, clipper):
    """Sutherland-Hodgman clip of convex polygons (CCW vertex lists)."""
    output = [tuple(p) for p in subject]
    n = len(clipper)
    for i in range(n):
        a = np.asarray(clipper[i])
        b = np.asarray(clipper[(i + 1) % n])
        edge = b - a
        input_pts = output
        output = []
        for j in range(len(input_pts)):
            p = np.asarray(input_pts[j])
            q = np.asarray(input_pts[(j + 1) % len(input_pts)])
            p_in = edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0]) >= 0
            q_in = edge[0] * (q[1] - a[1]) - edge[1] * (q[0] - a[0]) >= 0
            if p_in:
                output.append(tuple(p))
            if p_in != q_in:
                d = q - p
                denom = edge[0] * d[1] - edge[1] * d[0]
                t = (edge[0] * (a[1] - p[1]) - edge[1] * (a[0] - p[0])) / denom
                output.append(tuple(p + t * d))
        if not output:
            return []
    return output


def clip_area(subject, clipper) -> float:
    pts = clip_polygon(subject, clipper)
    if len(pts) < 3:
        return 0.0
    arr = np.asarray(pts)
    x, y = arr[:, 0], arr[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def raster_membership(rings, x, y):
    """Even-odd scanline fill at one sample point; independent of Polygon."""
    crossings = 0
    for ring in rings:
        n = len(ring)
        for i in range(n):
            x0, y0 = ring[i]
            x1, y1 = ring[(i + 1) % n]
            if (y0 <= y) != (y1 <= y):
                xi = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
                if xi > x:
                    crossings += 1
    return crossings % 2 == 1


def rect(x0, x1, y0, y1):
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]


def random_box(rng, span=1.5):
    return OrientedBox(
        center=rng.uniform(-span, span, size=2),
        heading=rng.uniform(-math.pi, math.pi),
        half_extent=(rng.uniform(0.3, 1.2), rng.uniform(0.2, 0.8)),
    )


# ---------------------------------------------------------------------------
# oriented boxes


def test_box_corners_straight():
    box = OrientedBox(center=np.array([1.0, 2.0]), heading=0.0, half_extent=(2.0, 1.0))
    got = sorted(map(tuple, box.corners()))
    assert got == [(-1.0, 1.0), (-1.0, 3.0), (3.0, 1.0), (3.0, 3.0)]


def test_box_contains_boundary_point():
    box = OrientedBox(center=np.zeros(2), heading=0.0, half_extent=(1.0, 1.0))
    assert box.contains_points(np.array([[1.0, 0.0], [1.0, 1.0]])).all()
    assert not box.contains_points(np.array([[1.0 + 1e-12, 0.0]]))[0]


def test_touching_boxes_overlap():
    a = OrientedBox(center=np.array([0.0, 0.0]), heading=0.0, half_extent=(1.0, 1.0))
    b = OrientedBox(center=np.array([2.0, 0.0]), heading=0.0, half_extent=(1.0, 1.0))
    assert boxes_overlap(a, b)
    c = OrientedBox(center=np.array([2.0 + 1e-9, 0.0]), heading=0.0, half_extent=(1.0, 1.0))
    assert not boxes_overlap(a, c)


def test_rotated_box_overlap_cases():
    a = OrientedBox(center=np.zeros(2), heading=0.0, half_extent=(1.0, 1.0))
    # diamond whose tip just reaches the square's right edge
    b = OrientedBox(
        center=np.array([2.0 + math.sqrt(2.0), 0.0]),
        heading=math.pi / 4,
        half_extent=(1.0, 1.0),
    )
    assert not boxes_overlap(a, b)
    c = OrientedBox(
        center=np.array([1.0 + math.sqrt(2.0) - 1e-6, 0.0]),
        heading=math.pi / 4,
        half_extent=(1.0, 1.0),
    )
    assert boxes_overlap(a, c)


def test_sat_matches_clipping_oracle():
    rng = np.random.default_rng(7)
    hits = 0
    for _ in range(300):
        a, b = random_box(rng), random_box(rng)
        area = clip_area([tuple(p) for p in a.corners()], [tuple(p) for p in b.corners()])
        got = boxes_overlap(a, b)
        if area > 1e-9:
            # a genuinely shared region must be reported
            assert got
            hits += 1
        if not got:
            # a separating axis implies an empty intersection
            assert area <= 1e-9
    assert hits > 50  # the sample actually exercised overlapping pairs


def test_boxes_overlap_symmetric():
    rng = np.random.default_rng(1)
    for _ in range(100):
        a, b = random_box(rng), random_box(rng)
        assert boxes_overlap(a, b) == boxes_overlap(b, a)


# ---------------------------------------------------------------------------
# polygons


def test_polygon_needs_three_noncollinear_vertices():
    with pytest.raises(ValidationError):
        Polygon([[0, 0], [1, 1]])
    with pytest.raises(ValidationError):
        Polygon([[0, 0], [1, 1], [2, 2]])


def test_point_on_edge_counts_inside():
    m = PolygonSet(outers=(Polygon(rect(0, 2, 0, 2)),))
    assert point_in_polygon_set((1.0, 0.0), m)
    assert point_in_polygon_set((0.0, 0.0), m)
    assert point_in_polygon_set((2.0, 2.0), m)
    assert not point_in_polygon_set((2.0 + 1e-12, 1.0), m)


def test_hole_boundary_counts_inside_region():
    m = PolygonSet(
        outers=(Polygon(rect(0, 10, 0, 10)),),
        holes=(Polygon(list(reversed(rect(4, 6, 4, 6)))),),
    )
    assert not point_in_polygon_set((5.0, 5.0), m)
    assert point_in_polygon_set((4.0, 5.0), m)  # hole edge is still drivable
    assert point_in_polygon_set((1.0, 1.0), m)


def test_orientation_validation():
    with pytest.raises(ValidationError):
        PolygonSet(outers=(Polygon(list(reversed(rect(0, 1, 0, 1)))),))
    with pytest.raises(ValidationError):
        PolygonSet(outers=(Polygon(rect(0, 5, 0, 5)),), holes=(Polygon(rect(1, 2, 1, 2)),))


def test_pip_matches_scanline_oracle():
    rng = np.random.default_rng(3)
    outer = rect(-5, 5, -5, 5)
    hole = list(reversed(rect(-1.5, 1.5, -1.0, 2.0)))
    m = PolygonSet(outers=(Polygon(outer),), holes=(Polygon(hole),))
    rings = [outer, hole]
    pts = rng.uniform(-6, 6, size=(2000, 2))
    sd, _ = signed_distances(pts, m)
    for p, d in zip(pts, sd):
        if abs(d) < 0.02:
            continue
        assert point_in_polygon_set(p, m) == raster_membership(rings, p[0], p[1])


def test_signed_distance_sign_convention():
    m = PolygonSet(outers=(Polygon(rect(0, 4, 0, 4)),))
    assert signed_distance_to_drivable((2.0, 2.0), m) == -2.0
    assert signed_distance_to_drivable((6.0, 2.0), m) == 2.0
    assert signed_distance_to_drivable((4.0, 2.0), m) == 0.0


def test_signed_distance_consistent_with_pip():
    rng = np.random.default_rng(11)
    m = PolygonSet(
        outers=(Polygon(rect(-4, 4, -4, 4)),),
        holes=(Polygon(list(reversed(rect(-1, 1, -1, 1)))),),
    )
    pts = rng.uniform(-5, 5, size=(500, 2))
    for p in pts:
        sd = signed_distance_to_drivable(p, m)
        if abs(sd) <= 1e-9:
            continue
        assert (sd < 0) == point_in_polygon_set(p, m)


def test_outward_direction_is_unit_and_descends():
    m = PolygonSet(outers=(Polygon(rect(0, 2, 0, 2)),))
    pts = np.array([[3.0, 1.0], [1.0, 1.0], [-1.0, 3.5]])
    sd, outward = signed_distances(pts, m)
    assert sd[0] == pytest.approx(1.0)
    np.testing.assert_allclose(outward[0], [1.0, 0.0])
    np.testing.assert_allclose(outward[1], [0.0, 0.0])  # inside: no direction
    assert np.linalg.norm(outward[2]) == pytest.approx(1.0)
    # moving against the outward direction reduces the distance
    sd2, _ = signed_distances(pts[2:] - 1e-6 * outward[2:], m)
    assert sd2[0] < sd[2]


def test_translation_invariance():
    rng = np.random.default_rng(5)
    m = PolygonSet(outers=(Polygon(rect(-3, 3, -2, 2)),))
    shift = np.array([13.7, -4.2])
    m2 = PolygonSet(outers=(Polygon(np.asarray(rect(-3, 3, -2, 2)) + shift),))
    pts = rng.uniform(-4, 4, size=(200, 2))
    sd, _ = signed_distances(pts, m)
    sd2, _ = signed_distances(pts + shift, m2)
    np.testing.assert_allclose(sd, sd2, atol=1e-9)
    for p, d in zip(pts, sd):
        if abs(d) > 1e-9:
            assert point_in_polygon_set(p, m) == point_in_polygon_set(p + shift, m2)


# ---------------------------------------------------------------------------
# polylines


def brute_project(p, points):
    """Projection oracle via exact quadratic interpolation.

    The squared distance along each segment is a quadratic in the segment
    parameter, so sampling it at t = 0, 1/2, 1 and interpolating recovers
    the true minimum without using the implementation's dot-product
    projection formula.
    """
    best = (np.inf, 0.0)
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(points, axis=0), axis=1))])
    for i in range(len(points) - 1):
        a, b = points[i], points[i + 1]
        y0 = float(np.sum((a - p) ** 2))
        ym = float(np.sum((a + 0.5 * (b - a) - p) ** 2))
        y1 = float(np.sum((b - p) ** 2))
        quad = 2.0 * (y0 - 2.0 * ym + y1)
        lin = -3.0 * y0 + 4.0 * ym - y1
        if quad > 0.0:
            t = min(max(-lin / (2.0 * quad), 0.0), 1.0)
        else:
            t = 0.0 if y0 <= y1 else 1.0
        foot = a + t * (b - a)
        d = float(np.linalg.norm(foot - p))
        s = float(cum[i] + t * np.linalg.norm(b - a))
        if d < best[0] - 1e-12:
            best = (d, s)
    return best


def test_polyline_basics():
    line = Polyline([[0.0, 0.0], [3.0, 0.0], [3.0, 4.0]])
    assert line.length == pytest.approx(7.0)
    np.testing.assert_allclose(line.point_at(3.0), [3.0, 0.0])
    np.testing.assert_allclose(line.point_at(5.0), [3.0, 2.0])
    np.testing.assert_allclose(line.point_at(99.0), [3.0, 4.0])
    assert line.tangent_heading_at(1.0) == 0.0
    assert line.tangent_heading_at(5.0) == pytest.approx(math.pi / 2)


def test_polyline_rejects_duplicates_and_short_input():
    with pytest.raises(ValidationError):
        Polyline([[0.0, 0.0]])
    with pytest.raises(ValidationError):
        Polyline([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])


def test_projection_examples():
    line = Polyline([[0.0, 0.0], [10.0, 0.0]])
    s, off, heading = project_to_polyline((3.0, 2.0), line)
    assert s == pytest.approx(3.0)
    assert off == pytest.approx(2.0)  # left of an east-bound tangent
    assert heading == 0.0
    s, off, _ = project_to_polyline((3.0, -2.0), line)
    assert off == pytest.approx(-2.0)
    s, off, _ = project_to_polyline((-4.0, 1.0), line)
    assert s == 0.0


def test_projection_tie_takes_smaller_arclength():
    # a point equidistant from two parallel legs of a U-shaped line
    line = Polyline([[0.0, 0.0], [10.0, 0.0], [10.0, 2.0], [0.0, 2.0]])
    s, _, _ = project_to_polyline((5.0, 1.0), line)
    assert s == pytest.approx(5.0)


def test_projection_matches_dense_oracle():
    rng = np.random.default_rng(17)
    for _ in range(30):
        pts = np.cumsum(rng.uniform(-1, 1, size=(6, 2)), axis=0)
        pts = pts[np.concatenate([[True], np.linalg.norm(np.diff(pts, axis=0), axis=1) > 1e-6])]
        if len(pts) < 2:
            continue
        line = Polyline(pts)
        for _ in range(10):
            p = rng.uniform(-2, 2, size=2)
            s, off, _ = project_to_polyline(p, line)
            d_oracle, s_oracle = brute_project(p, pts)
            assert abs(off) == pytest.approx(d_oracle, abs=1e-7)
            # s can legitimately differ when two segments are equidistant;
            # require matching s unless another segment ties within 1e-6
            if abs(s - s_oracle) > 1e-3:
                foot_mine = line.point_at(s)
                assert np.linalg.norm(foot_mine - p) == pytest.approx(d_oracle, abs=1e-6)
