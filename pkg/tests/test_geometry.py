import math

from hypothesis import given, strategies as st

from ammdrpg.geometry import Point, Segment, dist, edge_length, midpoint, point_on_segment

coord = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


def test_dist_examples():
    assert dist(Point(0, 0), Point(3, 4)) == 5.0
    assert dist(Point(1, 1), Point(1, 1)) == 0.0
    assert dist(Point(-2, 0), Point(2, 0)) == 4.0


def test_point_on_segment_examples():
    s = Segment(Point(0, 0), Point(10, 0))
    assert point_on_segment(s, 0.0) == Point(0, 0)
    assert point_on_segment(s, 1.0) == Point(10, 0)
    assert point_on_segment(s, 0.5) == Point(5, 0)
    s2 = Segment(Point(2, 2), Point(2, 8))
    assert point_on_segment(s2, 0.25) == Point(2, 3.5)


def test_edge_length_and_midpoint():
    s = Segment(Point(0, 0), Point(3, 4))
    assert edge_length(s) == 5.0
    assert midpoint(s) == Point(1.5, 2.0)
    assert edge_length(Segment(Point(7, 7), Point(7, 7))) == 0.0


def test_point_iterable():
    x, y = Point(3.5, -1.0)
    assert (x, y) == (3.5, -1.0)


@given(coord, coord, coord, coord)
def test_dist_symmetric(ax, ay, bx, by):
    p, q = Point(ax, ay), Point(bx, by)
    assert dist(p, q) == dist(q, p)
    assert dist(p, q) >= 0.0


@given(coord, coord, coord, coord, coord, coord)
def test_dist_triangle_inequality(ax, ay, bx, by, cx, cy):
    p, q, r = Point(ax, ay), Point(bx, by), Point(cx, cy)
    assert dist(p, r) <= dist(p, q) + dist(q, r) + 1e-6 * (1 + dist(p, r))


@given(coord, coord, coord, coord,
       st.floats(min_value=0.0, max_value=1.0))
def test_point_on_segment_scales_length(ax, ay, bx, by, t):
    s = Segment(Point(ax, ay), Point(bx, by))
    p = point_on_segment(s, t)
    assert math.isclose(dist(s.a, p), t * edge_length(s),
                        rel_tol=1e-9, abs_tol=1e-6)
