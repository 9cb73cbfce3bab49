"""Plane geometry primitives shared by every other module."""

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass(frozen=True)
class Segment:
    a: Point
    b: Point


def dist(p: Point, q: Point) -> float:
    return math.hypot(p.x - q.x, p.y - q.y)


def edge_length(s: Segment) -> float:
    return dist(s.a, s.b)


def point_on_segment(s: Segment, t: float) -> Point:
    """Point at parameter t in [0,1] along s, measured from s.a."""
    return Point(s.a.x + t * (s.b.x - s.a.x), s.a.y + t * (s.b.y - s.a.y))


def midpoint(s: Segment) -> Point:
    return point_on_segment(s, 0.5)
