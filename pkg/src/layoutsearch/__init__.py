"""Text-to-layout image retrieval.

Queries are parsed into spatial-relation triplets, solved into 3D cuboid
layouts by interval branch-and-prune, projected to 2D reference boxes and
matched against per-image object detections.
"""
from .interval import Interval, Tribool
from .query import Query, SemanticTriplet, parse_dsl, parse_english, render_dsl
from .relations import RelationThresholds, compile
from .scene_model import LayoutState, ObjectLibrary, default_library
from .solver import SolverConfig, sample_layout, solve

__all__ = [
    "Interval",
    "LayoutState",
    "ObjectLibrary",
    "Query",
    "RelationThresholds",
    "SemanticTriplet",
    "SolverConfig",
    "Tribool",
    "compile",
    "default_library",
    "parse_dsl",
    "parse_english",
    "render_dsl",
    "sample_layout",
    "solve",
]
__version__ = "0.1.0"
