"""Mothership-and-drones routing over target graphs.

A toolkit for the all-terrain mothership / multiple-drones routing problem:
instance model and generator, mixed-integer second-order-cone model builder
with LP emission, a native convex subproblem solver, desk-scale exact
enumeration, the five-step matheuristic, solution validation, and a CLI.
"""

from .geometry import Point, Segment, dist, edge_length, point_on_segment
from .instance import (
    Instance,
    TargetEdge,
    TargetGraph,
    VisitMode,
    generate_grid_instance,
    load_instance,
    make_graph,
    save_instance,
    validate_instance,
)

__all__ = [
    "Point", "Segment", "dist", "edge_length", "point_on_segment",
    "Instance", "TargetEdge", "TargetGraph", "VisitMode",
    "generate_grid_instance", "load_instance", "make_graph",
    "save_instance", "validate_instance",
]
